#![allow(dead_code)]

use std::f64::consts::PI;

use kpi_core::{SpectralField, TorusGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_samples(grid: &TorusGrid, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..grid.len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// Random coefficients on every non-Nyquist mode with `k != 0`.
pub fn random_mean_zero(grid: TorusGrid, rng: &mut impl Rng) -> SpectralField {
    let mut f = SpectralField::zeros(grid);
    for l in -grid.lmax()..=grid.lmax() {
        for k in -grid.kmax()..=grid.kmax() {
            if k != 0 {
                f.set(k, l, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).unwrap();
            }
        }
    }
    f
}

/// `(2π)^{-d} ∫ u e^{-i(kx+ly)}` by the trapezoid rule, one mode at a time.
pub fn direct_coefficient(grid: &TorusGrid, samples: &[Complex64], k: i64, l: i64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..grid.ny() {
        let y = if grid.ny() > 1 { grid.y_node(r) } else { 0.0 };
        for c in 0..grid.nx() {
            let x = grid.x_node(c);
            acc += samples[r * grid.nx() + c] * Complex64::from_polar(1.0, -(k as f64 * x + l as f64 * y));
        }
    }
    acc / grid.len() as f64
}

/// Trapezoid `∫|u|²` over the torus.
pub fn physical_norm_sqr(grid: &TorusGrid, samples: &[Complex64]) -> f64 {
    let cell = (2.0 * PI).powi(if grid.ny() > 1 { 2 } else { 1 }) / grid.len() as f64;
    cell * samples.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
