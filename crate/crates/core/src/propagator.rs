//! Exact propagation `û(t) = e^{itω} û(0)` and an explicit RK4 reference.

use num_complex::Complex64;

use crate::dispersion::{critical_frequency, omega_unchecked, symbol, DispersionParams, Mode};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Dim;

/// `e^{itω}` with the rounding error of the product `tω` folded back in, so
/// phases stay accurate when `tω` is large.
#[inline]
pub fn phase_factor(t: f64, w: f64) -> Complex64 {
    let p = t * w;
    let e = t.mul_add(w, -p);
    let (s, c) = p.sin_cos();
    if e == 0.0 {
        return Complex64::new(c, s);
    }
    let (se, ce) = e.sin_cos();
    Complex64::new(c * ce - s * se, s * ce + c * se)
}

fn check_params(u: &SpectralField, p: &DispersionParams) -> Result<()> {
    if u.grid().dim() == Dim::Two && p.mode == Mode::Reduced1D {
        return Err(Error::dim("reduced one-dimensional dispersion applied to a 2D field"));
    }
    Ok(())
}

/// Multiplies every mode by `e^{itω}`; zero-frequency content is left in
/// place (it is below tolerance) and Nyquist modes are zeroed.
fn apply_phases(u: &SpectralField, t: f64, freq: impl Fn(i64, i64) -> f64) -> SpectralField {
    let grid = *u.grid();
    let nx = grid.nx();
    let mut out = u.clone();
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        let (k, l) = (grid.k_of(i % nx), grid.l_of(i / nx));
        if grid.is_nyquist(k, l) {
            *c = Complex64::new(0.0, 0.0);
        } else if k != 0 {
            *c *= phase_factor(t, freq(k, l));
        }
    }
    out
}

pub fn evolve(u0: &SpectralField, t: f64, p: &DispersionParams) -> Result<SpectralField> {
    check_params(u0, p)?;
    u0.check_mean_zero()?;
    Ok(apply_phases(u0, t, |k, l| omega_unchecked(k, l, p)))
}

/// Evolves each transverse frequency `l` with the reduced equation at
/// `λ = |l|`.
pub fn evolve_modes(u0: &SpectralField, t: f64, alpha: f64) -> Result<SpectralField> {
    if u0.grid().dim() != Dim::Two {
        return Err(Error::dim("mode-by-mode evolution needs a 2D field"));
    }
    u0.check_mean_zero()?;
    let base = DispersionParams::reduced(alpha, 0.0)?;
    let grid = *u0.grid();
    let nx = grid.nx();
    let mut out = SpectralField::zeros(grid);
    for row in 0..grid.ny() {
        let l = grid.l_of(row);
        let slice = base.slice(l);
        let coeffs = &u0.coeffs()[row * nx..(row + 1) * nx];
        let target = &mut out.coeffs_mut()[row * nx..(row + 1) * nx];
        for (col, (dst, src)) in target.iter_mut().zip(coeffs).enumerate() {
            let k = grid.k_of(col);
            *dst = if grid.is_nyquist(k, l) {
                Complex64::new(0.0, 0.0)
            } else if k == 0 {
                *src
            } else {
                src * phase_factor(t, omega_unchecked(k, 0, &slice))
            };
        }
    }
    Ok(out)
}

/// Semiclassical propagation of a field written in the frame translated by
/// `s = ⌊ξ₀/h⌋`: mode `k` picks up `e^{itΦ(hk)/h^{1+α}}` with
/// `Φ(ξ) = φ(ξ + hs) − φ(ξ₀)`, where `φ` is the symbol with the given `λ`.
pub fn evolve_semiclassical(w0: &SpectralField, t: f64, h: f64, p: &DispersionParams) -> Result<SpectralField> {
    if w0.grid().dim() != Dim::One {
        return Err(Error::dim("semiclassical evolution acts on 1D fields"));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::param(format!("semiclassical parameter must lie in (0, 1), got {h}")));
    }
    let xi0 = critical_frequency(p).ok_or_else(|| Error::param("semiclassical evolution needs lambda > 0"))?;
    let s = (xi0 / h).floor() as i64;
    let grid = *w0.grid();
    let scale = w0.coeff_norm_sqr().sqrt();
    let singular = w0.get(-s, 0).norm();
    if singular > crate::field::MEAN_ZERO_TOL * scale {
        return Err(Error::MeanZero { l: 0, magnitude: singular });
    }
    let gauge = symbol(xi0, p)?;
    let denom = h.powf(1.0 + p.alpha);
    let mut out = w0.clone();
    for (col, c) in out.coeffs_mut().iter_mut().enumerate() {
        let k = grid.k_of(col);
        if grid.is_nyquist(k, 0) {
            *c = Complex64::new(0.0, 0.0);
        } else if k + s != 0 {
            let big = symbol(h * (k + s) as f64, p)? - gauge;
            *c *= phase_factor(t, big / denom);
        }
    }
    Ok(out)
}

/// Classical RK4 on `dû/dt = iωû`, integrating only the modes that are
/// nonzero initially (the system is diagonal, the others stay zero).
pub fn rk4_reference_evolve(u0: &SpectralField, t: f64, steps: usize, p: &DispersionParams) -> Result<SpectralField> {
    if steps == 0 {
        return Err(Error::param("RK4 needs at least one step"));
    }
    check_params(u0, p)?;
    u0.check_mean_zero()?;
    let grid = *u0.grid();
    let nx = grid.nx();
    let active: Vec<usize> = u0
        .coeffs()
        .iter()
        .enumerate()
        .filter(|&(i, c)| {
            let (k, l) = (grid.k_of(i % nx), grid.l_of(i / nx));
            *c != Complex64::new(0.0, 0.0) && k != 0 && !grid.is_nyquist(k, l)
        })
        .map(|(i, _)| i)
        .collect();
    let rates: Vec<Complex64> = active
        .iter()
        .map(|&i| Complex64::new(0.0, omega_unchecked(grid.k_of(i % nx), grid.l_of(i / nx), p)))
        .collect();
    let rhs = |y: &[Complex64], out: &mut [Complex64]| {
        for ((o, yi), r) in out.iter_mut().zip(y).zip(&rates) {
            *o = r * yi;
        }
    };
    let dt = t / steps as f64;
    let n = active.len();
    let mut y: Vec<Complex64> = active.iter().map(|&i| u0.coeffs()[i]).collect();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![Complex64::default(); n], vec![Complex64::default(); n], vec![Complex64::default(); n], vec![Complex64::default(); n], vec![Complex64::default(); n]);
    for _ in 0..steps {
        rhs(&y, &mut k1);
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * dt * k1[j];
        }
        rhs(&tmp, &mut k2);
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * dt * k2[j];
        }
        rhs(&tmp, &mut k3);
        for j in 0..n {
            tmp[j] = y[j] + dt * k3[j];
        }
        rhs(&tmp, &mut k4);
        for j in 0..n {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    let mut out = u0.clone();
    for c in out.coeffs_mut().iter_mut() {
        *c = Complex64::new(0.0, 0.0);
    }
    for (&i, v) in active.iter().zip(y) {
        out.coeffs_mut()[i] = v;
    }
    for row in 0..grid.ny() {
        out.coeffs_mut()[row * nx] = u0.coeffs()[row * nx];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;

    #[test]
    fn zero_time_is_bitwise_identity() {
        let g = TorusGrid::two_d(16, 8).unwrap();
        let mut u = SpectralField::zeros(g);
        u.set(3, -2, Complex64::new(0.3, -1.7)).unwrap();
        u.set(-5, 1, Complex64::new(-2.1, 0.4)).unwrap();
        let p = DispersionParams::full_2d(2.0).unwrap();
        assert_eq!(evolve(&u, 0.0, &p).unwrap(), u);
    }

    #[test]
    fn full_period_returns_mode() {
        let g = TorusGrid::two_d(16, 8).unwrap();
        let u = SpectralField::mode(g, 1, 1).unwrap();
        let p = DispersionParams::full_2d(2.0).unwrap();
        let v = evolve(&u, std::f64::consts::PI, &p).unwrap();
        assert!(v.max_abs_diff(&u).unwrap() <= 1e-13);
    }

    #[test]
    fn phase_factor_large_argument() {
        // 1e8·(1 + 2^-30) is not exactly representable as a product; compare
        // with the phase split into exactly representable pieces.
        let t = 1.0e8;
        let w = 1.0 + 2f64.powi(-30);
        let direct = phase_factor(t, w);
        let a = phase_factor(1.0, 1.0e8);
        let b = phase_factor(1.0, 1.0e8 * 2f64.powi(-30));
        assert!((direct - a * b).norm() < 1e-12);
    }

    #[test]
    fn rejects_mean() {
        let g = TorusGrid::two_d(16, 8).unwrap();
        let mut u = SpectralField::mode(g, 1, 1).unwrap();
        u.set(0, 2, Complex64::new(0.1, 0.0)).unwrap();
        let p = DispersionParams::full_2d(2.0).unwrap();
        assert!(matches!(evolve(&u, 1.0, &p), Err(Error::MeanZero { l: 2, .. })));
    }

    #[test]
    fn rk4_single_step_matches_taylor() {
        let g = TorusGrid::one_d(16).unwrap();
        let u = SpectralField::mode(g, 1, 0).unwrap();
        let p = DispersionParams::reduced(2.0, 1.0).unwrap();
        let dt = 0.01;
        let z = Complex64::new(0.0, 2.0 * dt);
        let taylor = 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
        let v = rk4_reference_evolve(&u, dt, 1, &p).unwrap();
        assert!((v.get(1, 0) - taylor).norm() < 1e-16);
    }
}
