//! Gaussian wave packets concentrated at the critical frequency, the
//! observability dichotomy in `α`, and the solutions invisible to a
//! horizontally localized control.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::control::{ControlOperator, ControlProfile, ProfileKind};
use crate::dispersion::{critical_frequency, DispersionParams, Mode};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::gramian::{observability_ratio, RatioMethod};
use crate::grid::{grid_size_for, Dim, TorusGrid};
use crate::lp::smooth_step;
use crate::quadrature::integrate_adaptive;

/// Tolerance of the adaptive quadrature behind the packet coefficients.
pub const COEFFICIENT_TOL: f64 = 1e-12;

/// Beyond this radius `e^{−z²/2}` is below the smallest normal double.
const GAUSSIAN_RADIUS: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PacketParams {
    pub alpha: f64,
    /// The cutoff vanishes for `|ξ| ≥ big_b`.
    pub big_b: f64,
    /// The cutoff equals 1 for `|ξ| ≤ small_b`.
    pub small_b: f64,
    /// Observation region `(−π, −β) ∪ (β, π]`.
    pub beta: f64,
}

impl PacketParams {
    pub fn new(alpha: f64, big_b: f64, small_b: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::param(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if !(small_b > 0.0 && small_b < big_b && big_b.is_finite()) {
            return Err(Error::param(format!("cutoff bounds need 0 < b < B, got b = {small_b}, B = {big_b}")));
        }
        if !(beta > 0.0 && beta < PI) {
            return Err(Error::param(format!("beta must lie in (0, pi), got {beta}")));
        }
        Ok(Self { alpha, big_b, small_b, beta })
    }

    /// Defaults `B = 1`, `b = 1/2`, `β = π/4`.
    pub fn with_alpha(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0, 0.5, PI / 4.0)
    }

    /// Integer transverse frequency `N_n = round(2^{n(α+2)/2})`.
    pub fn transverse_frequency(&self, n: u32) -> Result<u64> {
        let e = n as f64 * (self.alpha + 2.0) / 2.0;
        if e > 52.0 {
            return Err(Error::param(format!("transverse frequency 2^{e} is beyond exact integer range")));
        }
        Ok(2f64.powf(e).round().max(1.0) as u64)
    }

    /// `h_n = N_n^{−2/(α+2)}`, within rounding of `2^{−n}`.
    pub fn h(&self, n: u32) -> Result<f64> {
        Ok(h_from_transverse(self.transverse_frequency(n)?, self.alpha))
    }

    /// Packet scale `h̃`: `h^{1−α}` for `α < 1`, `h^{1/2}` otherwise.
    pub fn h_tilde(&self, h: f64) -> f64 {
        if self.alpha < 1.0 {
            h.powf(1.0 - self.alpha)
        } else {
            h.sqrt()
        }
    }

    /// Gaussian width parameter `ε = √h̃`.
    pub fn eps(&self, h: f64) -> f64 {
        self.h_tilde(h).sqrt()
    }

    /// `ψ(ξ) = 1 − θ((|ξ| − b)/(B − b))`.
    pub fn cutoff(&self, xi: f64) -> f64 {
        1.0 - smooth_step((xi.abs() - self.small_b) / (self.big_b - self.small_b))
    }

    /// Hann-squared bumps on `(β, π)` and `(−π, −β)`, jointly normalized.
    pub fn observation_profile(&self, grid: TorusGrid) -> Result<ControlProfile> {
        ControlProfile::from_intervals(&[(-PI, -self.beta), (self.beta, PI)], ProfileKind::HannSquared, grid)
    }
}

pub fn h_from_transverse(n: u64, alpha: f64) -> f64 {
    (n as f64).powf(-2.0 / (alpha + 2.0))
}

/// `g^ε(k) = (√ε/2π) ∫_{−π/ε}^{π/ε} e^{−z²/2} e^{−iεkz} dz` for each `k`.
pub fn gaussian_coefficients(eps: f64, ks: &[i64]) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(format!("eps must lie in (0, 1), got {eps}")));
    }
    let upper = (PI / eps).min(GAUSSIAN_RADIUS);
    ks.iter()
        .map(|&k| {
            let w = eps * k as f64;
            let (v, _) = integrate_adaptive(|z| (-0.5 * z * z).exp() * (w * z).cos(), 0.0, upper, COEFFICIENT_TOL)?;
            Ok(eps.sqrt() / PI * v)
        })
        .collect()
}

/// Largest `|k|` with `ψ(h̃k) ≠ 0`.
pub fn packet_radius(params: &PacketParams, h: f64) -> i64 {
    (params.big_b / params.h_tilde(h)).ceil() as i64
}

/// `v₀ = Σ_k g^ε(k) ψ(h̃k) e^{ikx}` on a 1D grid.
pub fn packet_initial_data(params: &PacketParams, h: f64, grid: TorusGrid) -> Result<SpectralField> {
    if grid.dim() != Dim::One {
        return Err(Error::dim("packets live on a 1D grid"));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::param(format!("h must lie in (0, 1), got {h}")));
    }
    let radius = packet_radius(params, h);
    if radius > grid.kmax() {
        return Err(Error::Truncation(format!(
            "packet needs |k| <= {radius}; use nx >= {}",
            grid_size_for(radius)
        )));
    }
    let ht = params.h_tilde(h);
    let ks: Vec<i64> = (-radius..=radius).collect();
    let g = gaussian_coefficients(params.eps(h), &ks)?;
    let mut v = SpectralField::zeros(grid);
    for (&k, gk) in ks.iter().zip(g) {
        v.set(k, 0, Complex64::new(gk * params.cutoff(ht * k as f64), 0.0))?;
    }
    Ok(v)
}

/// `s = ⌊ξ₀/h⌋` for the symbol of `p`.
pub fn critical_shift(h: f64, p: &DispersionParams) -> Result<i64> {
    let xi0 = critical_frequency(p).ok_or_else(|| Error::param("critical frequency needs lambda > 0"))?;
    Ok((xi0 / h).floor() as i64)
}

/// Multiplies by `e^{isx}`, `s = ⌊ξ₀/h⌋`, moving the packet onto the
/// critical frequency.
pub fn modulated_packet(v: &SpectralField, h: f64, p: &DispersionParams) -> Result<SpectralField> {
    if v.grid().dim() != Dim::One {
        return Err(Error::dim("modulation acts on 1D fields"));
    }
    let s = critical_shift(h, p)?;
    let grid = *v.grid();
    let mut out = SpectralField::zeros(grid);
    for (k, _, c) in v.iter_modes() {
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        let target = k + s;
        if target.abs() > grid.kmax() {
            return Err(Error::Truncation(format!(
                "shifted mode {target} leaves the grid; use nx >= {}",
                grid_size_for(target.abs())
            )));
        }
        out.set(target, 0, c)?;
    }
    Ok(out)
}

/// Embeds `w(x)` as `w(x) e^{iNy}` with `N = h^{−(α+2)/2}`, which must be a
/// positive integer.
pub fn embed_2d(w: &SpectralField, h: f64, alpha: f64, ny: usize) -> Result<SpectralField> {
    if w.grid().dim() != Dim::One {
        return Err(Error::dim("embedding takes a 1D field"));
    }
    let n = DispersionParams::semiclassical_lambda(alpha, h);
    let rounded = n.round();
    if !(rounded >= 1.0) || (n - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::param(format!(
            "h^(-(alpha+2)/2) = {n} is not an integer; choose an integer N first and set h = N^(-2/(alpha+2))"
        )));
    }
    let l = rounded as i64;
    let grid = TorusGrid::two_d(w.grid().nx(), ny)?;
    if l > grid.lmax() {
        return Err(Error::Truncation(format!("transverse frequency {l} needs ny > {}", 2 * l + 1)));
    }
    let mut out = SpectralField::zeros(grid);
    for (k, _, c) in w.iter_modes() {
        if c != Complex64::new(0.0, 0.0) {
            out.set(k, l, c)?;
        }
    }
    Ok(out)
}

/// The y-independent solution `e^{ikx}` on a 2D grid.
pub fn invisible_solution(k: i64, grid: TorusGrid) -> Result<SpectralField> {
    if k == 0 {
        return Err(Error::param("invisible solutions need k != 0"));
    }
    if grid.dim() != Dim::Two {
        return Err(Error::dim("invisible solutions live on a 2D grid"));
    }
    SpectralField::mode(grid, k, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyRow {
    pub n: u32,
    pub h: f64,
    pub eps: f64,
    pub ratio: f64,
    pub grid_nx: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyTable {
    pub alpha: f64,
    pub horizon: f64,
    pub rows: Vec<DichotomyRow>,
    /// Least-squares slope of `log ratio` against `log ε`.
    pub slope: f64,
}

impl DichotomyTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].ratio < w[0].ratio)
    }

    pub fn min_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min)
    }
}

pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// One row: packet at scale `h_n`, moved to the critical frequency of the
/// `λ = N_n` equation, observed through `ω` over `(0, T)`.
pub fn dichotomy_row(params: &PacketParams, n: u32, horizon: f64) -> Result<DichotomyRow> {
    let big_n = params.transverse_frequency(n)?;
    let h = h_from_transverse(big_n, params.alpha);
    let semiclassical = DispersionParams::reduced(params.alpha, 1.0)?;
    let s = critical_shift(h, &semiclassical)?;
    let nx = grid_size_for(s + packet_radius(params, h) + 1);
    let grid = TorusGrid::one_d(nx)?;
    let v = packet_initial_data(params, h, grid)?;
    let w = modulated_packet(&v, h, &semiclassical)?;
    let physical = DispersionParams::new(params.alpha, big_n as f64, Mode::Reduced1D)?;
    let op = ControlOperator::vertical(params.observation_profile(grid)?);
    let ratio = observability_ratio(&w, horizon, &op, &physical, &RatioMethod::Gramian)?;
    Ok(DichotomyRow { n, h, eps: params.eps(h), ratio, grid_nx: nx })
}

pub fn dichotomy_experiment(params: &PacketParams, horizon: f64, ns: &[u32]) -> Result<DichotomyTable> {
    if ns.len() < 2 {
        return Err(Error::param("the dichotomy table needs at least two scales"));
    }
    if !(horizon > 0.0) {
        return Err(Error::param(format!("horizon must be positive, got {horizon}")));
    }
    let rows: Vec<DichotomyRow> = ns.par_iter().map(|&n| dichotomy_row(params, n, horizon)).collect::<Result<_>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let slope = log_log_slope(&eps, &ratios);
    Ok(DichotomyTable { alpha: params.alpha, horizon, rows, slope })
}
