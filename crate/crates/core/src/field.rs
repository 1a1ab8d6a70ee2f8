//! Truncated Fourier series on the torus.
//!
//! Coefficients use the normalization `û(k) = (2π)^{-d} ∫ u e^{-ik·x}`, so
//! `‖u‖² = (2π)^d Σ |û|²` and `(u, v) = ∫ u v̄ = (2π)^d Σ û conj(v̂)`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{TorusGrid, Window};

/// Relative size of zero-frequency content tolerated by evolutions.
pub const MEAN_ZERO_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, coeffs: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Wraps a coefficient array stored in FFT order (row = l, column = k).
    pub fn from_coeffs(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::dim(format!(
                "coefficient array has length {}, grid {}x{} needs {}",
                coeffs.len(),
                grid.nx(),
                grid.ny(),
                grid.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    /// The exponential `e^{i(kx+ly)}`.
    pub fn mode(grid: TorusGrid, k: i64, l: i64) -> Result<Self> {
        let mut f = Self::zeros(grid);
        f.set(k, l, Complex64::new(1.0, 0.0))?;
        Ok(f)
    }

    /// Standard complex Gaussian coefficients on `window` (never `k = 0`),
    /// scaled to unit `L²` norm.
    pub fn random_unit<R: Rng + ?Sized>(grid: TorusGrid, window: Window, rng: &mut R) -> Result<Self> {
        window.fits(&grid)?;
        let mut f = Self::zeros(grid);
        for l in window.y_freqs() {
            for k in window.x_freqs() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                f.set(k, l, Complex64::new(re, im))?;
            }
        }
        let n = f.norm();
        f.scale(Complex64::new(1.0 / n, 0.0));
        Ok(f)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient at `(k, l)`, or zero outside the grid window.
    pub fn get(&self, k: i64, l: i64) -> Complex64 {
        self.grid.index_of(k, l).map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn set(&mut self, k: i64, l: i64, value: Complex64) -> Result<()> {
        let i = self.grid.index_of(k, l).ok_or_else(|| {
            Error::Truncation(format!("frequency ({k}, {l}) outside the {}x{} grid", self.grid.nx(), self.grid.ny()))
        })?;
        self.coeffs[i] = value;
        Ok(())
    }

    /// Iterates `(k, l, coefficient)` in storage order.
    pub fn iter_modes(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        let nx = self.grid.nx();
        self.coeffs.iter().enumerate().map(move |(i, &c)| (self.grid.k_of(i % nx), self.grid.l_of(i / nx), c))
    }

    pub fn coeff_norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.volume() * self.coeff_norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `(u, v) = ∫ u v̄`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.same_grid(other)?;
        let s: Complex64 = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.volume())
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::dim(format!(
                "grid mismatch: {}x{} vs {}x{}",
                self.grid.nx(),
                self.grid.ny(),
                other.grid.nx(),
                other.grid.ny()
            )));
        }
        Ok(())
    }

    pub fn scale(&mut self, a: Complex64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a·x`.
    pub fn axpy(&mut self, a: Complex64, x: &Self) -> Result<()> {
        self.same_grid(x)?;
        self.coeffs.iter_mut().zip(&x.coeffs).for_each(|(c, xc)| *c += a * xc);
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// Zeros the `k = 0` coefficient of every transverse frequency.
    pub fn project_mean_zero(&self) -> Self {
        let mut out = self.clone();
        let nx = self.grid.nx();
        for row in 0..self.grid.ny() {
            out.coeffs[row * nx] = Complex64::new(0.0, 0.0);
        }
        out
    }

    /// Fails with the offending `l` if some `|û(0, l)|` exceeds
    /// `MEAN_ZERO_TOL` times the coefficient norm.
    pub fn check_mean_zero(&self) -> Result<()> {
        let scale = self.coeff_norm_sqr().sqrt();
        let nx = self.grid.nx();
        for row in 0..self.grid.ny() {
            let m = self.coeffs[row * nx].norm();
            if m > MEAN_ZERO_TOL * scale {
                return Err(Error::MeanZero { l: self.grid.l_of(row), magnitude: m });
            }
        }
        Ok(())
    }

    /// Zeros the unpaired Nyquist row and column.
    pub fn zero_nyquist(&mut self) {
        let nx = self.grid.nx();
        let (ny, grid) = (self.grid.ny(), self.grid);
        for row in 0..ny {
            for col in 0..nx {
                if grid.is_nyquist(grid.k_of(col), grid.l_of(row)) {
                    self.coeffs[row * nx + col] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Keeps only the coefficients inside `window`.
    pub fn restrict(&self, window: Window) -> Self {
        let mut out = self.clone();
        let nx = self.grid.nx();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            if !window.contains(self.grid.k_of(i % nx), self.grid.l_of(i / nx)) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Fraction of `‖u‖²` carried by frequencies with `|k| > 0.9·kmax` or
    /// `|l| > 0.9·lmax` of the grid window; a spectral-leakage indicator.
    pub fn outer_mass_fraction(&self) -> f64 {
        let total = self.coeff_norm_sqr();
        if total == 0.0 {
            return 0.0;
        }
        let kcut = 0.9 * self.grid.kmax() as f64;
        let lcut = 0.9 * self.grid.lmax() as f64;
        let outer: f64 = self
            .iter_modes()
            .filter(|&(k, l, _)| k.abs() as f64 > kcut || (l != 0 && l.abs() as f64 > lcut))
            .map(|(_, _, c)| c.norm_sqr())
            .sum();
        outer / total
    }

    /// Copies every coefficient into a grid of the same dimension whose
    /// window contains this one.
    pub fn resample(&self, target: TorusGrid) -> Result<Self> {
        if target.dim() != self.grid.dim() {
            return Err(Error::dim("resampling cannot change dimension"));
        }
        let mut out = Self::zeros(target);
        for (k, l, c) in self.iter_modes() {
            if c != Complex64::new(0.0, 0.0) {
                out.set(k, l, c)?;
            }
        }
        Ok(out)
    }

    /// `((2π)^d Σ |k|^{2s} (1+l²)^s |û|²)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (k, l, c) in self.iter_modes() {
            let m = c.norm_sqr();
            if k == 0 {
                if m == 0.0 {
                    continue;
                }
                if s < 0.0 {
                    return Err(Error::MeanZero { l, magnitude: m.sqrt() });
                }
            }
            let wk = (k.abs() as f64).powf(2.0 * s);
            let wl = (1.0 + (l * l) as f64).powf(s);
            acc += wk * wl * m;
        }
        Ok((self.grid.volume() * acc).sqrt())
    }
}

pub fn sobolev_norm(field: &SpectralField, s: f64) -> Result<f64> {
    field.sobolev_norm(s)
}

pub fn project_mean_zero(field: &SpectralField) -> SpectralField {
    field.project_mean_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn sobolev_examples() {
        let g = TorusGrid::one_d(16).unwrap();
        let e1 = SpectralField::mode(g, 1, 0).unwrap();
        assert!((e1.sobolev_norm(0.0).unwrap() - (2.0 * PI).sqrt()).abs() < 1e-14);
        let e2 = SpectralField::mode(g, 2, 0).unwrap();
        assert!((e2.sobolev_norm(-1.0).unwrap() - (2.0 * PI).sqrt() / 2.0).abs() < 1e-14);
        let c = SpectralField::mode(g, 0, 0).unwrap();
        assert!(matches!(c.sobolev_norm(-1.0), Err(Error::MeanZero { l: 0, .. })));
    }

    #[test]
    fn mean_zero_projection() {
        let g = TorusGrid::one_d(16).unwrap();
        let mut f = SpectralField::mode(g, 1, 0).unwrap();
        f.set(0, 0, Complex64::new(5.0, 0.0)).unwrap();
        let p = f.project_mean_zero();
        assert_eq!(p, SpectralField::mode(g, 1, 0).unwrap());
        let only_zero = SpectralField::mode(g, 0, 0).unwrap().project_mean_zero();
        assert_eq!(only_zero.coeff_norm_sqr(), 0.0);
    }

    #[test]
    fn mean_zero_check_names_row() {
        let g = TorusGrid::two_d(16, 8).unwrap();
        let mut f = SpectralField::mode(g, 1, 2).unwrap();
        f.set(0, -3, Complex64::new(1e-3, 0.0)).unwrap();
        assert!(matches!(f.check_mean_zero(), Err(Error::MeanZero { l: -3, .. })));
    }

    #[test]
    fn random_unit_is_normalized_and_windowed() {
        let g = TorusGrid::two_d(32, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = SpectralField::random_unit(g, Window::new(5, 2), &mut rng).unwrap();
        assert!((f.norm() - 1.0).abs() < 1e-14);
        assert!(f.check_mean_zero().is_ok());
        assert!(f.iter_modes().all(|(k, l, c)| c.norm() == 0.0 || (k.abs() <= 5 && l.abs() <= 2)));
        assert_eq!(f.outer_mass_fraction(), 0.0);
    }
}
