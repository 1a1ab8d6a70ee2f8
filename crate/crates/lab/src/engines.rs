//! One engine per experiment kind. Engines are pure: they return file
//! contents and a JSON summary, and the runner decides where they go.

use std::path::{Path, PathBuf};

use kpi_core::control::{ControlOperator, ControlProfile};
use kpi_core::dispersion::{critical_frequency, group_velocity, symbol, DispersionParams};
use kpi_core::gramian::{
    assemble_blocks, block_minima, frequency_spread, observability_constant, Direction, GramianBlock,
    QuadratureApplicator,
};
use kpi_core::grid::grid_size_for;
use kpi_core::hum::{synthesize_control, verify_control, CgOptions, ControlTrajectory};
use kpi_core::io::{read_field, write_gramian, write_trajectory, Snapshots, StoredBlock};
use kpi_core::packets::{dichotomy_experiment, PacketParams};
use kpi_core::propagator::evolve;
use kpi_core::quadrature::TimeQuadrature;
use kpi_core::spectral::spectral_constants;
use kpi_core::{SpectralField, TorusGrid, Window};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::*;
use crate::error::{LabError, Result};
use crate::row;
use crate::scan::{frequency_localized_scan, weak_observability_diagnostic, ProfileChoice, ScanParams, MIN_PROFILE_NODES};
use crate::table::Table;

/// Thresholds of the dichotomy pass/fail flags.
pub const DICHOTOMY_DROP: f64 = 0.2;
pub const DICHOTOMY_SLOPE: (f64, f64) = (0.3, 0.7);
pub const DICHOTOMY_FLOOR: f64 = 0.3;

/// Panel width, in radians of phase, of the coarse rule in the quadrature
/// check; the refined rule halves it.
const CHECK_RADIANS: f64 = 48.0;

#[derive(Debug, Clone)]
pub struct Context {
    pub seed: u64,
    pub format: OutputFormat,
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
}

impl Output {
    fn new(summary: Value) -> Self {
        Self { files: Vec::new(), summary }
    }

    /// Adds a table as `stem.csv`, or `stem.json` in JSON mode.
    fn table(&mut self, stem: &str, table: &Table, format: OutputFormat) -> Result<()> {
        match format {
            OutputFormat::Json => {
                self.files.push((format!("{stem}.json"), serde_json::to_vec_pretty(&table.to_json())?))
            }
            _ => self.files.push((format!("{stem}.csv"), table.to_csv().into_bytes())),
        }
        Ok(())
    }
}

pub fn run(spec: &Spec, ctx: &Context) -> Result<Output> {
    match spec {
        Spec::Dispersion(s) => dispersion(s, ctx),
        Spec::Evolve(s) => evolve_engine(s, ctx),
        Spec::Observe(s) => observe(s, ctx),
        Spec::Gramian(s) => gramian(s, ctx),
        Spec::SpectralConstant(s) => spectral(s, ctx),
        Spec::Control(s) => control(s, ctx),
        Spec::Dichotomy(s) => dichotomy(s, ctx),
        Spec::FrequencyScan(s) => frequency_scan(s, ctx),
        Spec::WeakObservability(s) => weak(s, ctx),
    }
}

fn rng(ctx: &Context, own: Option<u64>) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(own.unwrap_or(ctx.seed))
}

fn load_field(ctx: &Context, path: &Path) -> Result<SpectralField> {
    let full = if path.is_absolute() { path.to_path_buf() } else { ctx.base_dir.join(path) };
    let bytes = std::fs::read(&full).map_err(|e| LabError::io(format!("reading {}", full.display()), e))?;
    let mut slice = bytes.as_slice();
    let field = read_field(&mut slice)?;
    if !slice.is_empty() {
        return Err(kpi_core::Error::Format(format!("{} trailing bytes in {}", slice.len(), full.display())).into());
    }
    Ok(field)
}

/// x-nodes for a window reaching `kmax` that also resolve the profile.
fn profile_nodes(kmax: i64) -> usize {
    grid_size_for(kmax).max(MIN_PROFILE_NODES)
}

fn profile_on(grid: TorusGrid, region: [f64; 2], kind: kpi_core::control::ProfileKind) -> Result<ControlProfile> {
    Ok(ControlProfile::new(region[0], region[1], kind, grid)?)
}

/// 2D grid holding the window, and the control operator on it.
fn control_setup(
    axis: ControlAxis,
    region: [f64; 2],
    kind: kpi_core::control::ProfileKind,
    kmax: i64,
    lmax: i64,
) -> Result<(TorusGrid, ControlOperator)> {
    let grid = TorusGrid::two_d(profile_nodes(kmax), grid_size_for(lmax))?;
    let op = match axis {
        ControlAxis::Vertical => ControlOperator::vertical(profile_on(grid.x_grid(), region, kind)?),
        ControlAxis::Horizontal => ControlOperator::horizontal(profile_on(grid.y_grid()?, region, kind)?),
    };
    Ok((grid, op))
}

/// `t,k,l,re,im` rows for a list of snapshots.
fn snapshot_table(times: &[f64], fields: &[SpectralField], window: Window) -> Table {
    let mut t = Table::new(&["t", "k", "l", "re", "im"]);
    for (&time, f) in times.iter().zip(fields) {
        for l in -window.lmax..=window.lmax {
            for k in -window.kmax..=window.kmax {
                let c = f.get(k, l);
                t.push(row![time, k, l, c.re, c.im]);
            }
        }
    }
    t
}

fn export_snapshots(
    out: &mut Output,
    stem: &str,
    snaps: &Snapshots,
    window: Window,
    format: OutputFormat,
) -> Result<()> {
    match format {
        OutputFormat::Bin => {
            let mut buf = Vec::new();
            write_trajectory(&mut buf, snaps, Some(window))?;
            out.files.push((format!("{stem}.kpit"), buf));
            Ok(())
        }
        _ => out.table(stem, &snapshot_table(&snaps.times, &snaps.fields, window), format),
    }
}

fn dispersion(s: &DispersionSpec, ctx: &Context) -> Result<Output> {
    let p = DispersionParams::reduced(s.alpha, s.lambda)?;
    let mut t = Table::new(&["xi", "phi", "dphi"]);
    for i in 0..s.points {
        let xi = s.xi[0] + (s.xi[1] - s.xi[0]) * i as f64 / (s.points - 1) as f64;
        t.push(row![xi, symbol(xi, &p)?, group_velocity(xi, &p)?]);
    }
    let mut out = Output::new(json!({
        "alpha": s.alpha,
        "lambda": s.lambda,
        "critical_frequency": critical_frequency(&p),
    }));
    out.table("dispersion", &t, ctx.format)?;
    Ok(out)
}

fn evolve_engine(s: &EvolveSpec, ctx: &Context) -> Result<Output> {
    let p = match s.equation {
        Equation::Full2D => DispersionParams::full_2d(s.alpha)?,
        Equation::Reduced => DispersionParams::reduced(s.alpha, s.lambda.unwrap_or_default())?,
    };
    let (u0, window) = match &s.input {
        Some(path) => {
            let u = load_field(ctx, path)?;
            let is_2d = u.grid().dim() == kpi_core::Dim::Two;
            if is_2d != (s.equation == Equation::Full2D) {
                return Err(LabError::config(format!(
                    "input field is {}D but the equation is {:?}",
                    if is_2d { 2 } else { 1 },
                    s.equation
                )));
            }
            let w = Window::full(u.grid());
            (u, w)
        }
        None => {
            let (grid, window) = match s.equation {
                Equation::Full2D => {
                    (TorusGrid::two_d(grid_size_for(s.kmax), grid_size_for(s.lmax))?, Window::new(s.kmax, s.lmax))
                }
                Equation::Reduced => (TorusGrid::one_d(grid_size_for(s.kmax))?, Window::new(s.kmax, 0)),
            };
            (SpectralField::random_unit(grid, window, &mut rng(ctx, s.seed))?, window)
        }
    };
    let n0 = u0.norm_sqr();
    let mut norms = Table::new(&["t", "norm", "relative_drift"]);
    let mut fields = Vec::with_capacity(s.times.len());
    let mut max_drift: f64 = 0.0;
    for &t in &s.times {
        let u = evolve(&u0, t, &p)?;
        let drift = (u.norm_sqr() - n0).abs() / n0.max(f64::MIN_POSITIVE);
        max_drift = max_drift.max(drift);
        norms.push(row![t, u.norm(), drift]);
        fields.push(u);
    }
    let horizon = s.times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let snaps = Snapshots { horizon, times: s.times.clone(), fields };
    let mut out = Output::new(json!({
        "grid": kpi_core::io::describe_grid(u0.grid()),
        "times": s.times.len(),
        "initial_norm": u0.norm(),
        "max_relative_drift": max_drift,
    }));
    out.table("norms", &norms, ctx.format)?;
    export_snapshots(&mut out, "snapshots", &snaps, window, ctx.format)?;
    Ok(out)
}

fn eigen_table(blocks: &[GramianBlock]) -> Table {
    let mut t = Table::new(&["fixed", "index", "eigenvalue"]);
    for b in blocks {
        for (i, ev) in b.eigenvalues().into_iter().enumerate() {
            t.push(row![b.fixed, i, ev]);
        }
    }
    t
}

/// Smallest eigenvalue of the vertical-control Gramian slice at `l`,
/// recomputed by time quadrature on a coarse rule and its refinement.
pub fn quadrature_minima(
    alpha: f64,
    l: i64,
    region: [f64; 2],
    kind: kpi_core::control::ProfileKind,
    kmax: i64,
    horizon: f64,
) -> Result<(f64, f64, usize)> {
    let grid = TorusGrid::one_d(profile_nodes(kmax))?;
    let op = ControlOperator::vertical(profile_on(grid, region, kind)?);
    let p = DispersionParams::reduced(alpha, l.unsigned_abs() as f64)?;
    let window = Window::new(kmax, 0);
    let spread = {
        let mut probe = SpectralField::zeros(grid);
        for k in window.x_freqs() {
            probe.set(k, 0, Complex64::new(1.0, 0.0))?;
        }
        frequency_spread(&probe, &p)
    };
    let coarse = TimeQuadrature::for_bandwidth(horizon, spread, CHECK_RADIANS)?;
    let fine = coarse.refined()?;
    let base = QuadratureApplicator::new(op, p, window, grid, horizon, Direction::Observability)?;
    let a = base.clone().with_quadrature(coarse.clone()).min_eigenvalue()?;
    let b = base.with_quadrature(fine).min_eigenvalue()?;
    Ok((a, b, coarse.len()))
}

fn observe(s: &ObserveSpec, ctx: &Context) -> Result<Output> {
    let (_, op) = control_setup(s.control, s.region, s.profile, s.kmax, s.lmax)?;
    let p = DispersionParams::full_2d(s.alpha)?;
    let blocks = assemble_blocks(&op, Window::new(s.kmax, s.lmax), s.horizon, &p, Direction::Observability)?;
    let minima = block_minima(&blocks)?;
    let lambda_min = observability_constant(&blocks)?;
    let worst = minima.iter().copied().fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a }).0;
    let mut t = Table::new(&["fixed", "lambda_min"]);
    for &(f, m) in &minima {
        t.push(row![f, m]);
    }
    let mut summary = json!({
        "control": s.control,
        "alpha": s.alpha,
        "horizon": s.horizon,
        "kmax": s.kmax,
        "lmax": s.lmax,
        "lambda_min": lambda_min,
        "worst_block": worst,
        "observability_constant": if lambda_min > 0.0 { Some(1.0 / lambda_min) } else { None },
    });
    if s.quadrature_check {
        let (coarse, fine, nodes) = quadrature_minima(s.alpha, worst, s.region, s.profile, s.kmax, s.horizon)?;
        summary["quadrature_check"] = json!({
            "block": worst,
            "coarse_nodes": nodes,
            "lambda_min_coarse": coarse,
            "lambda_min_refined": fine,
            "refinement_change": (fine - coarse).abs() / coarse.abs(),
            "deviation_from_exact": (fine - lambda_min).abs() / lambda_min.abs(),
        });
    }
    let mut out = Output::new(summary);
    out.table("block_minima", &t, ctx.format)?;
    out.table("eigenvalues", &eigen_table(&blocks), ctx.format)?;
    Ok(out)
}

fn gramian(s: &GramianSpec, ctx: &Context) -> Result<Output> {
    let (_, op) = control_setup(s.control, s.region, s.profile, s.kmax, s.lmax)?;
    let p = DispersionParams::full_2d(s.alpha)?;
    let direction = match s.direction {
        GramianKind::Observability => Direction::Observability,
        GramianKind::Hum => Direction::Hum,
    };
    let blocks = assemble_blocks(&op, Window::new(s.kmax, s.lmax), s.horizon, &p, direction)?;
    let max_defect = blocks.iter().map(|b| b.assembly_defect).fold(0.0, f64::max);
    let mut out = Output::new(json!({
        "control": s.control,
        "direction": s.direction,
        "blocks": blocks.len(),
        "block_dim": blocks.first().map(|b| b.dim()),
        "max_hermitian_defect": max_defect,
    }));
    match ctx.format {
        OutputFormat::Bin => {
            let stored: Vec<StoredBlock> = blocks.iter().map(StoredBlock::from).collect();
            let mut buf = Vec::new();
            write_gramian(&mut buf, &stored)?;
            out.files.push(("gramian.kpig".into(), buf));
        }
        format => {
            let mut t = Table::new(&["fixed", "row", "col", "re", "im"]);
            for b in &blocks {
                for (i, &fi) in b.freqs.iter().enumerate() {
                    for (j, &fj) in b.freqs.iter().enumerate() {
                        let c = b.matrix[(i, j)];
                        t.push(row![b.fixed, fi, fj, c.re, c.im]);
                    }
                }
            }
            out.table("gramian", &t, format)?;
        }
    }
    out.table("eigenvalues", &eigen_table(&blocks), ctx.format)?;
    Ok(out)
}

fn spectral(s: &SpectralConstantSpec, ctx: &Context) -> Result<Output> {
    let g = profile_on(TorusGrid::one_d(s.nx)?, s.region, s.profile)?;
    let kappas = spectral_constants(&g, s.m_max)?;
    let mut t = Table::new(&["m0", "kappa", "lambda_min", "route", "bits"]);
    for k in &kappas {
        let (route, bits) = match k.route {
            kpi_core::spectral::SpectralRoute::Scalar => ("scalar", 53),
            kpi_core::spectral::SpectralRoute::Svd => ("svd", 53),
            kpi_core::spectral::SpectralRoute::Extended { bits } => ("extended", bits),
        };
        t.push(row![k.m0, k.kappa, k.lambda_min, route, bits]);
    }
    let nondecreasing = kappas.windows(2).all(|w| w[1].kappa >= w[0].kappa);
    let mut out = Output::new(json!({
        "m_max": s.m_max,
        "kappa_0": kappas[0].kappa,
        "inverse_square_mass": 1.0 / g.square_moment(0).re,
        "kappa_max": kappas.last().map(|k| k.kappa),
        "nondecreasing": nondecreasing,
    }));
    out.table("kappa", &t, ctx.format)?;
    Ok(out)
}

fn control(s: &ControlSpec, ctx: &Context) -> Result<Output> {
    let (grid, op) = control_setup(s.control, s.region, s.profile, s.kmax, s.lmax)?;
    let window = Window::new(s.kmax, s.lmax);
    let p = DispersionParams::full_2d(s.alpha)?;
    let u0 = match &s.initial {
        Some(path) => load_field(ctx, path)?,
        None => SpectralField::random_unit(grid, window, &mut rng(ctx, s.seed))?,
    };
    let u1 = match (&s.target_file, s.target) {
        (Some(path), _) => load_field(ctx, path)?,
        (None, Target::Zero) => SpectralField::zeros(*u0.grid()),
        (None, Target::Free) => evolve(&u0, s.horizon, &p)?,
    };
    if *u0.grid() != grid {
        // Fields from files carry their own grid; the operator must match it.
        return Err(LabError::config(format!(
            "initial field grid {} differs from the control grid {} implied by kmax/lmax",
            kpi_core::io::describe_grid(u0.grid()),
            kpi_core::io::describe_grid(&grid)
        )));
    }
    let opts = CgOptions { tol: s.tol, max_iter: s.max_iter };
    let mut traj = synthesize_control(&u0, &u1, s.horizon, &op, &p, window, &opts)?;
    traj.resample(s.export_nodes)?;
    let terminal_error = if s.verify_steps > 0 {
        let end = verify_control(&u0, &traj, &p, s.verify_steps)?;
        Some(end.sub(&u1)?.norm())
    } else {
        None
    };
    let energy = control_energy(&traj)?;
    let d = &traj.diagnostics;
    let mut residuals = Table::new(&["fixed", "iteration", "residual"]);
    for b in &d.blocks {
        for (i, r) in b.history.iter().enumerate() {
            residuals.push(row![b.fixed, i, *r]);
        }
    }
    let summary = json!({
        "iterations": d.iterations,
        "total_iterations": d.total_iterations,
        "final_residual": d.final_residual,
        "terminal_error": terminal_error,
        "initial_norm": u0.norm(),
        "control_energy": energy,
        "verify_steps": s.verify_steps,
    });
    let mut out = Output::new(summary.clone());
    out.files.push(("diagnostics.json".into(), serde_json::to_vec_pretty(&summary)?));
    out.table("residuals", &residuals, ctx.format)?;
    let snaps = Snapshots { horizon: traj.horizon, times: traj.nodes.clone(), fields: traj.samples.clone() };
    export_snapshots(&mut out, "control", &snaps, window, ctx.format)?;
    Ok(out)
}

/// `∫₀^T ‖f‖²` on a rule resolving the control's frequency spread.
fn control_energy(traj: &ControlTrajectory) -> Result<f64> {
    let spread = frequency_spread(&traj.adjoint_final, &traj.params);
    let nodes = TimeQuadrature::for_bandwidth(traj.horizon, 2.0 * spread, 24.0)?.len();
    Ok(traj.energy(nodes)?)
}

fn dichotomy(s: &DichotomySpec, ctx: &Context) -> Result<Output> {
    let params = PacketParams::new(s.alpha, s.big_b, s.small_b, s.beta)?;
    let table = dichotomy_experiment(&params, s.horizon, &s.ns)?;
    let mut t = Table::new(&["n", "h_n", "eps_n", "ratio", "grid_nx"]);
    for r in &table.rows {
        t.push(row![r.n, r.h, r.eps, r.ratio, r.grid_nx]);
    }
    let first = table.rows[0].ratio;
    let last = table.rows.last().expect("at least two rows").ratio;
    let checks = if s.alpha < 1.0 {
        json!({
            "strictly_decreasing": table.strictly_decreasing(),
            "drop_within_bound": last / first <= DICHOTOMY_DROP,
            "slope_in_band": (DICHOTOMY_SLOPE.0..=DICHOTOMY_SLOPE.1).contains(&table.slope),
        })
    } else {
        json!({ "floor_held": table.min_ratio() >= DICHOTOMY_FLOOR * first })
    };
    let mut out = Output::new(json!({
        "alpha": s.alpha,
        "horizon": s.horizon,
        "slope": table.slope,
        "drop": last / first,
        "min_ratio": table.min_ratio(),
        "checks": checks,
    }));
    out.table("dichotomy", &t, ctx.format)?;
    Ok(out)
}

fn frequency_scan(s: &FrequencyScanSpec, ctx: &Context) -> Result<Output> {
    let params = ScanParams {
        alpha: s.alpha,
        h: s.h,
        n_lo: s.n[0],
        n_hi: s.n[1],
        eps0: s.eps0,
        horizon: s.horizon,
        trials: s.trials,
        near: s.near,
    };
    let profile = ProfileChoice { region: s.region, kind: s.profile };
    let table = frequency_localized_scan(&params, &profile, s.seed.unwrap_or(ctx.seed))?;
    let mut t = Table::new(&["n", "regime", "modes", "single_mode", "max_ratio", "mean_ratio"]);
    for r in &table.rows {
        t.push(row![r.n, r.regime.as_str(), r.modes, r.single_mode, r.max_ratio, r.mean_ratio]);
    }
    let worst = table.rows.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let mut out = Output::new(json!({
        "lambda": table.lambda,
        "critical_block": table.critical_block,
        "max_ratio": worst,
        "all_finite": table.rows.iter().all(|r| r.max_ratio.is_finite()),
    }));
    out.table("scan", &t, ctx.format)?;
    Ok(out)
}

fn weak(s: &WeakObservabilitySpec, ctx: &Context) -> Result<Output> {
    let profile = ProfileChoice { region: s.region, kind: s.profile };
    let rows = weak_observability_diagnostic(
        s.alpha,
        &s.hs,
        s.horizon,
        s.trials,
        s.reach,
        &profile,
        s.seed.unwrap_or(ctx.seed),
    )?;
    let mut t = Table::new(&["h", "lambda", "kmax", "trials", "c_t", "c_plain", "remainder_share"]);
    for r in &rows {
        t.push(row![r.h, r.lambda, r.kmax, r.trials, r.c_t, r.c_plain, r.remainder_share]);
    }
    let mut out = Output::new(json!({
        "alpha": s.alpha,
        "max_c_t": rows.iter().map(|r| r.c_t).fold(0.0, f64::max),
    }));
    out.table("weak", &t, ctx.format)?;
    Ok(out)
}
