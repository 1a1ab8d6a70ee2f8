//! Dispersion relations of the (fractional) KP-I family.
//!
//! The 2D multiplier is `ω(k, l) = |k|^α k + l²/k`; fixing the transverse
//! frequency gives the one-dimensional symbol `φ(ξ) = |ξ|^α ξ + λ²/ξ`, whose
//! group velocity vanishes at `±ξ₀`, `ξ₀ = (λ²/(α+1))^{1/(α+2)}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One-dimensional equation with transverse parameter `λ`.
    Reduced1D,
    /// Two-dimensional equation; `λ` is ignored by `omega`.
    Full2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionParams {
    pub alpha: f64,
    pub lambda: f64,
    pub mode: Mode,
}

impl DispersionParams {
    pub fn new(alpha: f64, lambda: f64, mode: Mode) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::param(format!("dispersion exponent alpha must be positive, got {alpha}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::param(format!("transverse parameter lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { alpha, lambda, mode })
    }

    pub fn full_2d(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.0, Mode::Full2D)
    }

    pub fn reduced(alpha: f64, lambda: f64) -> Result<Self> {
        Self::new(alpha, lambda, Mode::Reduced1D)
    }

    /// The one-dimensional equation seen by transverse frequency `l`.
    pub fn slice(&self, l: i64) -> Self {
        Self { alpha: self.alpha, lambda: l.unsigned_abs() as f64, mode: Mode::Reduced1D }
    }

    /// `λ = h^{-(α+2)/2}`, the transverse parameter whose semiclassical
    /// rescaling `ξ = hk` yields the symbol with `λ = 1`.
    pub fn semiclassical_lambda(alpha: f64, h: f64) -> f64 {
        h.powf(-(alpha + 2.0) / 2.0)
    }
}

/// `|x|^α`, exact for small integer exponents.
pub(crate) fn abs_pow(x: f64, alpha: f64) -> f64 {
    if alpha.fract() == 0.0 && alpha <= 16.0 {
        x.abs().powi(alpha as i32)
    } else {
        x.abs().powf(alpha)
    }
}

/// Per-mode frequency `ω(k, l)`; the reduced mode uses `λ` in place of `l`.
pub fn omega(k: i64, l: i64, p: &DispersionParams) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("the dispersion relation is singular at k = 0".into()));
    }
    Ok(omega_unchecked(k, l, p))
}

#[inline]
pub(crate) fn omega_unchecked(k: i64, l: i64, p: &DispersionParams) -> f64 {
    let kf = k as f64;
    let t = match p.mode {
        Mode::Full2D => (l * l) as f64,
        Mode::Reduced1D => p.lambda * p.lambda,
    };
    abs_pow(kf, p.alpha) * kf + t / kf
}

/// `φ(ξ) = |ξ|^α ξ + λ²/ξ`.
pub fn symbol(xi: f64, p: &DispersionParams) -> Result<f64> {
    nonzero(xi)?;
    Ok(abs_pow(xi, p.alpha) * xi + p.lambda * p.lambda / xi)
}

/// `φ'(ξ) = (α+1)|ξ|^α − λ²/ξ²`.
pub fn group_velocity(xi: f64, p: &DispersionParams) -> Result<f64> {
    nonzero(xi)?;
    Ok((p.alpha + 1.0) * abs_pow(xi, p.alpha) - p.lambda * p.lambda / (xi * xi))
}

/// `φ''(ξ) = α(α+1)|ξ|^{α−1} sgn ξ + 2λ²/ξ³`.
pub fn symbol_second_derivative(xi: f64, p: &DispersionParams) -> Result<f64> {
    nonzero(xi)?;
    let a = p.alpha;
    Ok(a * (a + 1.0) * xi.abs().powf(a - 1.0) * xi.signum() + 2.0 * p.lambda * p.lambda / (xi * xi * xi))
}

fn nonzero(xi: f64) -> Result<()> {
    if xi == 0.0 || !xi.is_finite() {
        return Err(Error::Domain(format!("symbol undefined at xi = {xi}")));
    }
    Ok(())
}

/// A stationary point of the symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub xi: f64,
    pub phi_pp: f64,
}

/// Positive critical frequency, closed form polished by Newton's method on
/// `(α+1)ξ^{α+2} − λ²`. `None` when `λ = 0`.
pub fn critical_frequency(p: &DispersionParams) -> Option<f64> {
    if p.lambda == 0.0 {
        return None;
    }
    let a = p.alpha;
    let l2 = p.lambda * p.lambda;
    let mut xi = (l2 / (a + 1.0)).powf(1.0 / (a + 2.0));
    for _ in 0..3 {
        let f = (a + 1.0) * xi.powf(a + 2.0) - l2;
        let df = (a + 1.0) * (a + 2.0) * xi.powf(a + 1.0);
        let step = f / df;
        xi -= step;
        if step.abs() <= f64::EPSILON * xi {
            break;
        }
    }
    Some(xi)
}

/// Both critical points `-ξ₀ < ξ₀`; empty when `λ = 0`.
pub fn critical_points(p: &DispersionParams) -> Vec<CriticalPoint> {
    match critical_frequency(p) {
        None => Vec::new(),
        Some(xi0) => [-xi0, xi0]
            .into_iter()
            .map(|xi| CriticalPoint { xi, phi_pp: symbol_second_derivative(xi, p).expect("xi0 > 0") })
            .collect(),
    }
}

/// The critical point after translating frequencies by `h⌊ξ₀/h⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPointData {
    pub xi0: f64,
    pub h: f64,
    /// `⌊ξ₀/h⌋`, the integer modulation that moves `ξ₀` next to the origin.
    pub shift: i64,
    /// `ξ₀ − h⌊ξ₀/h⌋ ∈ [0, h)`.
    pub sigma_h: f64,
    /// `σ_h / h ∈ [0, 1)`.
    pub r_h: f64,
    /// `Φ''(σ_h)` for the translated symbol `Φ(ξ) = φ(ξ + h⌊ξ₀/h⌋)`.
    pub phi_pp_translated: f64,
    /// `φ''(ξ₀)`.
    pub phi_pp_critical: f64,
    /// `φ''(ξ₀)/2`.
    pub a0: f64,
}

pub fn semiclassical_translation(h: f64, p: &DispersionParams) -> Result<CriticalPointData> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::param(format!("semiclassical parameter must lie in (0, 1), got {h}")));
    }
    let xi0 = critical_frequency(p)
        .ok_or_else(|| Error::param("semiclassical translation needs lambda > 0"))?;
    let shift = (xi0 / h).floor();
    let mut sigma_h = h * (xi0 / h - shift);
    if sigma_h >= h {
        sigma_h = h.next_down();
    }
    let r_h = sigma_h / h;
    let phi_pp_critical = symbol_second_derivative(xi0, p)?;
    let phi_pp_translated = symbol_second_derivative(sigma_h + h * shift, p)?;
    Ok(CriticalPointData {
        xi0,
        h,
        shift: shift as i64,
        sigma_h,
        r_h,
        phi_pp_translated,
        phi_pp_critical,
        a0: phi_pp_critical / 2.0,
    })
}

/// Symmetric pair `(μ, μ)` in `[1/8, 7/8]` with `2μ ≡ 2r (mod 1)`.
pub fn mu_pair(r: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::param(format!("mu_pair needs r in [0, 1), got {r}")));
    }
    let f = (2.0 * r).fract();
    let mu = if f >= 0.25 { f / 2.0 } else { (f + 1.0) / 2.0 };
    Ok((mu, mu))
}
