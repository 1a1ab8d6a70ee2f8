//! Experiments on the semiclassical one-dimensional equation
//! `h^{α+1}Dₜu − |hDₓ|^α hDₓ u − (hDₓ)⁻¹u = 0`, run in physical time as the
//! reduced equation with `λ = h^{−(α+2)/2}`.

use kpi_core::control::{ControlOperator, ControlProfile, ProfileKind};
use kpi_core::dispersion::{critical_frequency, DispersionParams};
use kpi_core::gramian::{observability_ratio, RatioMethod};
use kpi_core::grid::grid_size_for;
use kpi_core::lp::{littlewood_paley_block, LPFamily};
use kpi_core::{Error, SpectralField, TorusGrid, Window};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Observation profile on a 1D grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileChoice {
    pub region: [f64; 2],
    pub kind: ProfileKind,
}

impl ProfileChoice {
    fn build(&self, grid: TorusGrid) -> kpi_core::Result<ControlProfile> {
        ControlProfile::new(self.region[0], self.region[1], self.kind, grid)
    }
}

/// Fewest grid nodes used to sample the profile; small blocks would
/// otherwise see `g` on a handful of nodes and misjudge `∫g²`.
pub const MIN_PROFILE_NODES: usize = 256;

fn scan_grid(kmax: i64) -> kpi_core::Result<TorusGrid> {
    TorusGrid::one_d(grid_size_for(kmax).max(MIN_PROFILE_NODES))
}

/// Unit-norm mean-free datum with uniform coefficients on `0 < |k| ≤ kmax`.
pub fn random_unit_datum(grid: TorusGrid, kmax: i64, rng: &mut impl Rng) -> kpi_core::Result<SpectralField> {
    let mut u = SpectralField::zeros(grid);
    for k in -kmax..=kmax {
        if k != 0 {
            u.set(k, 0, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))?;
        }
    }
    let n = u.norm();
    Ok(u.scaled(Complex64::new(1.0 / n, 0.0)))
}

/// Independent stream per index, so parallel rows do not depend on
/// scheduling.
fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanParams {
    pub alpha: f64,
    pub h: f64,
    pub n_lo: i32,
    pub n_hi: i32,
    pub eps0: f64,
    pub horizon: f64,
    pub trials: usize,
    /// Half-width, in blocks, of the near-critical regime.
    pub near: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `|ξ|` well above the critical frequency; the `|ξ|^α ξ` term dominates.
    HighFrequency,
    NearCritical,
    /// `|ξ|` well below the critical frequency; `1/ξ` dominates.
    LowFrequency,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::HighFrequency => "high-frequency",
            Regime::NearCritical => "near-critical",
            Regime::LowFrequency => "low-frequency",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub n: i32,
    pub regime: Regime,
    /// Integer frequencies carried by the block.
    pub modes: usize,
    /// `‖ψₙu₀‖²/∫‖Gψₙu‖²` for the mode at the block centre.
    pub single_mode: f64,
    /// Largest ratio over the random trials, a lower bound for `C₀`.
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanTable {
    pub params: ScanParams,
    pub lambda: f64,
    /// Block whose plateau holds the critical frequency.
    pub critical_block: i32,
    pub rows: Vec<ScanRow>,
}

/// Frequency-localized observability: for each Littlewood–Paley block `n`
/// with `2ⁿh ≤ ε₀`, the empirical constant in
/// `‖ψₙ(hD)u(0)‖² ≤ C₀ ∫₀^T ‖G ψₙ(hD)u(t)‖² dt`.
pub fn frequency_localized_scan(params: &ScanParams, profile: &ProfileChoice, seed: u64) -> kpi_core::Result<ScanTable> {
    let ScanParams { alpha, h, n_lo, n_hi, eps0, horizon, trials, near } = *params;
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Parameter(format!("h must lie in (0, 1), got {h}")));
    }
    if n_lo > n_hi || trials == 0 {
        return Err(Error::Parameter("scan needs n_lo <= n_hi and at least one trial".into()));
    }
    for n in n_lo..=n_hi {
        if 2f64.powi(n) * h > eps0 {
            return Err(Error::Parameter(format!(
                "block n = {n} violates the regime constraint 2^n h <= eps0 ({} > {eps0})",
                2f64.powi(n) * h
            )));
        }
    }
    let lambda = DispersionParams::semiclassical_lambda(alpha, h);
    let p = DispersionParams::reduced(alpha, lambda)?;
    let xi0 = critical_frequency(&DispersionParams::reduced(alpha, 1.0)?).expect("lambda = 1 has a critical point");
    let critical_block = (-xi0.log2()).round() as i32;
    let family = LPFamily::new();
    let rows = (n_lo..=n_hi)
        .into_par_iter()
        .map(|n| {
            // supp ψₙ(h·) ⊂ {2^{−n−1} ≤ h|k| ≤ 2^{−n+1}}
            let kmax = (2f64.powi(1 - n) / h).floor() as i64;
            let kmin = (2f64.powi(-n - 1) / h).ceil() as i64;
            if kmax < kmin.max(1) {
                return Err(Error::Parameter(format!("block n = {n} holds no integer frequencies at h = {h}")));
            }
            let grid = scan_grid(kmax)?;
            let op = ControlOperator::vertical(profile.build(grid)?);
            let ratio = |u: &SpectralField| -> kpi_core::Result<f64> {
                let block = littlewood_paley_block(u, n, h, &family)?;
                Ok(1.0 / observability_ratio(&block, horizon, &op, &p, &RatioMethod::Gramian)?)
            };
            let centre = ((2f64.powi(-n) / h).round() as i64).clamp(kmin.max(1), kmax);
            let single_mode = ratio(&SpectralField::mode(grid, centre, 0)?)?;
            let mut rng = stream(seed, (n as i64 - n_lo as i64) as u64);
            let mut max_ratio: f64 = 0.0;
            let mut sum = 0.0;
            for _ in 0..trials {
                let r = ratio(&random_unit_datum(grid, kmax, &mut rng)?)?;
                max_ratio = max_ratio.max(r);
                sum += r;
            }
            let regime = if (n - critical_block).abs() <= near {
                Regime::NearCritical
            } else if n < critical_block {
                Regime::HighFrequency
            } else {
                Regime::LowFrequency
            };
            let modes = 2 * (kmin.max(1)..=kmax).filter(|&k| family.psi_n(n, h * k as f64) > 0.0).count();
            Ok(ScanRow { n, regime, modes, single_mode, max_ratio, mean_ratio: sum / trials as f64 })
        })
        .collect::<kpi_core::Result<Vec<_>>>()?;
    Ok(ScanTable { params: *params, lambda, critical_block, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakRow {
    pub h: f64,
    pub lambda: f64,
    pub kmax: i64,
    pub trials: usize,
    /// Smallest `C` with `‖u₀‖² ≤ C(∫‖Gu‖² + ‖u₀‖²₋₁)` on every trial.
    pub c_t: f64,
    /// The same without the compact remainder, `max 1/∫‖Gu‖²`.
    pub c_plain: f64,
    /// Largest share of the remainder in `∫‖Gu‖² + ‖u₀‖²₋₁`.
    pub remainder_share: f64,
}

/// Constant of the weak observability inequality for a unit datum:
/// `1/(∫₀^T ‖G S(t)u₀‖² dt + ‖u₀‖²₋₁)`, with the pieces returned too.
pub fn weak_constant(
    u0: &SpectralField,
    horizon: f64,
    op: &ControlOperator,
    p: &DispersionParams,
) -> kpi_core::Result<(f64, f64, f64)> {
    let n2 = u0.norm_sqr();
    let observed = observability_ratio(u0, horizon, op, p, &RatioMethod::Gramian)?;
    let remainder = u0.sobolev_norm(-1.0)?.powi(2) / n2;
    Ok((1.0 / (observed + remainder), observed, remainder))
}

/// Empirical weak-observability constants for a list of `h`.
pub fn weak_observability_diagnostic(
    alpha: f64,
    hs: &[f64],
    horizon: f64,
    trials: usize,
    reach: f64,
    profile: &ProfileChoice,
    seed: u64,
) -> kpi_core::Result<Vec<WeakRow>> {
    if trials == 0 {
        return Err(Error::Parameter("weak observability needs at least one trial".into()));
    }
    hs.par_iter()
        .enumerate()
        .map(|(i, &h)| {
            if !(h > 0.0 && h < 1.0) {
                return Err(Error::Parameter(format!("h must lie in (0, 1), got {h}")));
            }
            let lambda = DispersionParams::semiclassical_lambda(alpha, h);
            let p = DispersionParams::reduced(alpha, lambda)?;
            let kmax = ((reach / h).ceil() as i64).max(1);
            let grid = scan_grid(kmax)?;
            Window::new(kmax, 0).fits(&grid)?;
            let op = ControlOperator::vertical(profile.build(grid)?);
            let mut rng = stream(seed, i as u64);
            let mut row = WeakRow { h, lambda, kmax, trials, c_t: 0.0, c_plain: 0.0, remainder_share: 0.0 };
            for _ in 0..trials {
                let u = random_unit_datum(grid, kmax, &mut rng)?;
                let (c, observed, remainder) = weak_constant(&u, horizon, &op, &p)?;
                row.c_t = row.c_t.max(c);
                row.c_plain = row.c_plain.max(1.0 / observed);
                row.remainder_share = row.remainder_share.max(remainder / (observed + remainder));
            }
            Ok(row)
        })
        .collect()
}
