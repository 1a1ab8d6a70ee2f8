//! Exact controllability by the Hilbert Uniqueness Method on a truncated
//! frequency window.
//!
//! With `S(t)` the free propagator, the control `f(t) = G S(t−T) φ` drives
//! `u' = Au + P G f` from `u₀` to `S(T)u₀ + Λφ`, where
//! `Λ = ∫₀^T S(s) P G² P S(−s) ds` and `P` projects onto the window. Solving
//! `Λφ = u₁ − S(T)u₀` therefore steers `u₀` to `u₁`, and `f` is the control
//! of least `L²((0,T); L²)` norm among those acting through `G`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::control::ControlOperator;
use crate::dispersion::{DispersionParams, Mode};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::gramian::{apply_blocks, assemble_blocks, block_indices, Direction, GramianBlock};
use crate::grid::{Dim, TorusGrid, Window};
use crate::propagator::evolve;
use crate::transform::FourierPlan;

/// Relative mass tolerated outside the window in data handed to the solver.
pub const LEAKAGE_TOL: f64 = 1e-10;

/// The HUM Gramian restricted to a window, stored as independent blocks.
#[derive(Debug, Clone)]
pub struct HumOperator {
    pub op: ControlOperator,
    pub params: DispersionParams,
    pub window: Window,
    pub grid: TorusGrid,
    pub horizon: f64,
    pub blocks: Vec<GramianBlock>,
}

impl HumOperator {
    pub fn new(
        op: ControlOperator,
        params: DispersionParams,
        window: Window,
        grid: TorusGrid,
        horizon: f64,
    ) -> Result<Self> {
        window.fits(&grid)?;
        op.check_grid(&grid)?;
        if grid.dim() == Dim::Two && params.mode == Mode::Reduced1D {
            return Err(Error::dim("reduced dispersion applied to a 2D grid"));
        }
        let blocks = assemble_blocks(&op, window, horizon, &params, Direction::Hum)?;
        Ok(Self { op, params, window, grid, horizon, blocks })
    }

    pub fn apply(&self, v: &SpectralField) -> Result<SpectralField> {
        if *v.grid() != self.grid {
            return Err(Error::dim("field grid differs from the operator grid"));
        }
        v.check_mean_zero()?;
        apply_blocks(&self.blocks, v)
    }
}

/// `Λ_T v` on `window` through the dense per-block Gramians.
pub fn hum_gramian_apply(
    v: &SpectralField,
    horizon: f64,
    op: &ControlOperator,
    p: &DispersionParams,
    window: Window,
) -> Result<SpectralField> {
    HumOperator::new(op.clone(), *p, window, *v.grid(), horizon)?.apply(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgOptions {
    /// Target for `‖b − Λφ‖ / ‖b‖` in each block.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500 }
    }
}

/// Convergence record of one block solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSolve {
    pub fixed: i64,
    pub iterations: usize,
    /// Smoothed residual norms, starting with `‖b‖`.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CgDiagnostics {
    /// Largest iteration count over blocks.
    pub iterations: usize,
    pub total_iterations: usize,
    /// `‖b − Λφ‖ / ‖b‖` recomputed after the solve (0 when `b = 0`).
    pub final_residual: f64,
    pub blocks: Vec<BlockSolve>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Jacobi-preconditioned conjugate gradient with minimal-residual
/// smoothing; the returned iterate's residual norms never increase.
pub fn preconditioned_cg(
    block: &GramianBlock,
    b: &[Complex64],
    opts: &CgOptions,
) -> Result<(Vec<Complex64>, BlockSolve)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut solve = BlockSolve { fixed: block.fixed, iterations: 0, history: vec![bnorm] };
    let zero = Complex64::new(0.0, 0.0);
    if bnorm == 0.0 {
        return Ok((vec![zero; n], solve));
    }
    let diag: Vec<f64> = (0..n).map(|i| block.matrix[(i, i)].re).collect();
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    let inv_diag: Vec<f64> = diag.iter().map(|&d| if d > 1e-14 * dmax { 1.0 / d } else { 1.0 }).collect();
    let precondition = |r: &[Complex64]| -> Vec<Complex64> { r.iter().zip(&inv_diag).map(|(c, d)| c * d).collect() };

    let mut x = vec![zero; n];
    let mut r = b.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re;
    let mut s = r.clone();
    let mut y = x.clone();
    let target = opts.tol * bnorm;
    for it in 1..=opts.max_iter {
        let q = block.apply_vec(&p);
        let pq = dot(&p, &q).re;
        if !(pq > 1e-14 * dmax * norm(&p).powi(2)) {
            solve.iterations = it;
            return Err(Error::NonConvergence {
                iterations: it,
                reason: format!("Gramian block at fixed index {} is degenerate along a search direction", block.fixed),
                history: solve.history,
            });
        }
        let a = rz / pq;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * q[i];
        }
        let d: Vec<Complex64> = r.iter().zip(&s).map(|(ri, si)| ri - si).collect();
        let dd = norm(&d).powi(2);
        if dd > 0.0 {
            let eta = -dot(&s, &d).re / dd;
            for i in 0..n {
                s[i] += eta * d[i];
                let step = x[i] - y[i];
                y[i] += eta * step;
            }
        }
        let sn = norm(&s);
        solve.history.push(sn);
        solve.iterations = it;
        if sn <= target {
            return Ok((y, solve));
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        reason: format!("residual above tolerance in block at fixed index {}", block.fixed),
        history: solve.history,
    })
}

/// Final adjoint datum together with the rule `f(t) = G S(t−T) φ`.
#[derive(Debug, Clone)]
pub struct ControlTrajectory {
    pub horizon: f64,
    pub adjoint_final: SpectralField,
    pub op: ControlOperator,
    pub params: DispersionParams,
    pub window: Window,
    pub nodes: Vec<f64>,
    pub samples: Vec<SpectralField>,
    pub diagnostics: CgDiagnostics,
}

impl ControlTrajectory {
    /// `f(t) = G S(t−T) φ`.
    pub fn control_at(&self, t: f64) -> Result<SpectralField> {
        let v = evolve(&self.adjoint_final, t - self.horizon, &self.params)?;
        self.op.apply(&v)
    }

    /// Grid samples of `f(t)`.
    pub fn control_samples_at(&self, plan: &FourierPlan, t: f64) -> Result<Vec<Complex64>> {
        let v = evolve(&self.adjoint_final, t - self.horizon, &self.params)?;
        let mut data = plan.inverse(&v)?;
        self.op.apply_physical(plan.grid(), &mut data)?;
        Ok(data)
    }

    /// Replaces the export nodes by `count` uniform nodes on `[0, T]`.
    pub fn resample(&mut self, count: usize) -> Result<()> {
        if count < 2 {
            return Err(Error::param("control export needs at least two nodes"));
        }
        let nodes: Vec<f64> = (0..count).map(|j| self.horizon * j as f64 / (count - 1) as f64).collect();
        let plan = FourierPlan::new(*self.adjoint_final.grid());
        self.samples = nodes
            .iter()
            .map(|&t| {
                let v = evolve(&self.adjoint_final, t - self.horizon, &self.params)?;
                self.op.apply_with(&plan, &v)
            })
            .collect::<Result<_>>()?;
        self.nodes = nodes;
        Ok(())
    }

    /// `∫₀^T ‖f‖² dt` by composite Gauss–Legendre.
    pub fn energy(&self, nodes: usize) -> Result<f64> {
        let q = crate::quadrature::TimeQuadrature::with_nodes(self.horizon, nodes)?;
        let plan = FourierPlan::new(*self.adjoint_final.grid());
        let grid = plan.grid();
        let cell = grid.volume() / grid.len() as f64;
        let mut acc = 0.0;
        for (&t, &w) in q.nodes.iter().zip(&q.weights) {
            let f = self.control_samples_at(&plan, t)?;
            acc += w * cell * f.iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        Ok(acc)
    }
}

pub const DEFAULT_EXPORT_NODES: usize = 256;

fn check_leakage(u: &SpectralField, window: Window, name: &str) -> Result<()> {
    let total = u.coeff_norm_sqr();
    if total == 0.0 {
        return Ok(());
    }
    let inside = u.restrict(window).coeff_norm_sqr();
    let outside = (total - inside).max(0.0) / total;
    if outside > LEAKAGE_TOL {
        return Err(Error::Truncation(format!(
            "{name} carries relative mass {outside:e} outside the window |k| <= {}, |l| <= {}",
            window.kmax, window.lmax
        )));
    }
    Ok(())
}

/// Solves `Λφ = P(u₁ − S(T)u₀)` block by block and packages the control.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_control(
    u0: &SpectralField,
    u1: &SpectralField,
    horizon: f64,
    op: &ControlOperator,
    p: &DispersionParams,
    window: Window,
    opts: &CgOptions,
) -> Result<ControlTrajectory> {
    u0.same_grid(u1)?;
    u0.check_mean_zero()?;
    u1.check_mean_zero()?;
    if !(horizon > 0.0) {
        return Err(Error::param(format!("horizon must be positive, got {horizon}")));
    }
    check_leakage(u0, window, "initial state")?;
    check_leakage(u1, window, "target state")?;
    let grid = *u0.grid();
    let hum = HumOperator::new(op.clone(), *p, window, grid, horizon)?;
    let b = u1.sub(&evolve(u0, horizon, p)?)?.restrict(window);
    let results: Vec<Result<(Vec<usize>, Vec<Complex64>, BlockSolve)>> = hum
        .blocks
        .par_iter()
        .map(|blk| {
            let idx = block_indices(blk, &grid)?;
            let rhs: Vec<Complex64> = idx.iter().map(|&i| b.coeffs()[i]).collect();
            let (x, s) = preconditioned_cg(blk, &rhs, opts)?;
            Ok((idx, x, s))
        })
        .collect();
    let mut phi = SpectralField::zeros(grid);
    let mut blocks = Vec::with_capacity(results.len());
    for res in results {
        let (idx, x, s) = res?;
        for (i, v) in idx.into_iter().zip(x) {
            phi.coeffs_mut()[i] = v;
        }
        blocks.push(s);
    }
    let bnorm = b.coeff_norm_sqr().sqrt();
    let final_residual = if bnorm == 0.0 {
        0.0
    } else {
        hum.apply(&phi)?.sub(&b)?.coeff_norm_sqr().sqrt() / bnorm
    };
    let diagnostics = CgDiagnostics {
        iterations: blocks.iter().map(|s| s.iterations).max().unwrap_or(0),
        total_iterations: blocks.iter().map(|s| s.iterations).sum(),
        final_residual,
        blocks,
    };
    let mut traj = ControlTrajectory {
        horizon,
        adjoint_final: phi,
        op: op.clone(),
        params: *p,
        window,
        nodes: Vec::new(),
        samples: Vec::new(),
        diagnostics,
    };
    traj.resample(DEFAULT_EXPORT_NODES)?;
    Ok(traj)
}

/// Terminal state of `u' = Au + P G f(t)` on the trajectory's window.
///
/// Integrates the interaction-picture form `v' = S(−t) P G f(t)` with
/// `u(t) = S(t)(u₀ + v(t))` by classical RK4, with `f` evaluated from the
/// synthesis rule at the stage times.
pub fn verify_control(
    u0: &SpectralField,
    traj: &ControlTrajectory,
    p: &DispersionParams,
    steps: usize,
) -> Result<SpectralField> {
    if steps < 100 {
        return Err(Error::param(format!("verification needs at least 100 steps, got {steps}")));
    }
    u0.check_mean_zero()?;
    let grid = *u0.grid();
    if grid != *traj.adjoint_final.grid() {
        return Err(Error::dim("initial state and trajectory live on different grids"));
    }
    let plan = FourierPlan::new(grid);
    let window = traj.window;
    let forcing = |t: f64| -> Result<SpectralField> {
        let mut data = traj.control_samples_at(&plan, t)?;
        traj.op.apply_physical(&grid, &mut data)?;
        let gf = plan.forward(&data)?.restrict(window);
        evolve(&gf, -t, p)
    };
    let dt = traj.horizon / steps as f64;
    let mut v = SpectralField::zeros(grid);
    let mut f_left = forcing(0.0)?;
    for n in 0..steps {
        let t = n as f64 * dt;
        // Stages two and three coincide because the right side does not
        // depend on v.
        let k1 = f_left;
        let k23 = forcing(t + 0.5 * dt)?;
        let k4 = forcing(t + dt)?;
        v.axpy(Complex64::new(dt / 6.0, 0.0), &k1)?;
        v.axpy(Complex64::new(4.0 * dt / 6.0, 0.0), &k23)?;
        v.axpy(Complex64::new(dt / 6.0, 0.0), &k4)?;
        f_left = k4;
    }
    let total = u0.add(&v)?;
    evolve(&total, traj.horizon, p)
}
