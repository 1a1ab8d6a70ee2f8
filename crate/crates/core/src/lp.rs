//! Dyadic Littlewood–Paley cutoffs in the x-frequency.
//!
//! With `η(ξ) = θ(|ξ| - 1)` rising from 0 on `|ξ| ≤ 1` to 1 on `|ξ| ≥ 2`, the
//! base cutoff is `ψ(ξ) = η(2ξ) - η(ξ)`. The blocks `ψ_n(ξ) = ψ(2ⁿξ)`
//! telescope, so `Σ_n ψ_n = 1` away from the origin.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::field::SpectralField;

/// `C^∞` ramp: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LPFamily;

impl LPFamily {
    pub fn new() -> Self {
        LPFamily
    }

    /// Base cutoff, supported in `1/2 ≤ |ξ| ≤ 2`, equal to 1 at `|ξ| = 1`.
    pub fn psi(&self, xi: f64) -> f64 {
        let a = xi.abs();
        smooth_step(2.0 * a - 1.0) - smooth_step(a - 1.0)
    }

    pub fn psi_n(&self, n: i32, xi: f64) -> f64 {
        self.psi(xi * 2f64.powi(n))
    }

    /// `ψ̃ = ψ(·/2) + ψ + ψ(2·)`, equal to 1 on the support of `ψ`.
    pub fn enlarged(&self, xi: f64) -> f64 {
        self.psi(xi / 2.0) + self.psi(xi) + self.psi(2.0 * xi)
    }

    /// Block indices whose support may contain `xi`; empty for `xi = 0`.
    pub fn contributing(&self, xi: f64) -> RangeInclusive<i32> {
        if xi == 0.0 || !xi.is_finite() {
            return 1..=0;
        }
        let c = -xi.abs().log2();
        (c.floor() as i32 - 1)..=(c.ceil() as i32 + 1)
    }
}

/// Multiplies the coefficient at `k` by `ψ_n(hk)`; acts on `k` only.
pub fn littlewood_paley_block(field: &SpectralField, n: i32, h: f64, family: &LPFamily) -> Result<SpectralField> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::param(format!("semiclassical parameter h must be positive, got {h}")));
    }
    let grid = *field.grid();
    let nx = grid.nx();
    let mut out = field.clone();
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        let k = grid.k_of(i % nx);
        *c *= family.psi_n(n, h * k as f64);
    }
    Ok(out)
}
