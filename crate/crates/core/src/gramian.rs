//! Time Gramians of the control operators.
//!
//! For a field with coefficients `c` the observed energy is
//! `∫₀^T ‖G S(t)u‖² dt = (2π)^d c* O c` where, at fixed transverse index,
//! `O[k₁,k₂] = M[k₁,k₂] E(ω(k₂) − ω(k₁), T)`, `E(Δ,T) = (e^{iTΔ} − 1)/(iΔ)`,
//! and `M` is the static Gram matrix of `G` on exponentials. Ratios are
//! therefore `c* O c / c* c`. The HUM operator `∫₀^T S(s)G²S(−s) ds` has the
//! conjugate time factor.

use num_complex::Complex64;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{Axis, ControlOperator, ControlProfile};
use crate::dispersion::{omega_unchecked, DispersionParams, Mode};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::{Dim, TorusGrid, Window};
use crate::propagator::phase_factor;
use crate::quadrature::TimeQuadrature;
use crate::transform::FourierPlan;

/// Tolerance on `‖B − B*‖_max / ‖B‖_max`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues above `−PSD_TOL · trace / dim` count as nonnegative.
pub const PSD_TOL: f64 = 1e-10;

/// `(e^{iTΔ} − 1)/(iΔ)`, with a Taylor branch for `|TΔ| < 1e−4`.
pub fn time_factor(delta: f64, horizon: f64) -> Complex64 {
    let theta = horizon * delta;
    if theta.abs() < 1e-4 {
        let z = Complex64::new(0.0, theta);
        return horizon * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0))));
    }
    // e^{iθ} − 1 = −2 sin²(θ/2) + i sin θ avoids cancellation for small θ.
    let s = (0.5 * theta).sin();
    let num = Complex64::new(-2.0 * s * s, theta.sin());
    num / Complex64::new(0.0, delta)
}

/// Which time-integrated operator a block represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `∫₀^T S(−t) G² S(t) dt`.
    Observability,
    /// `∫₀^T S(s) G² S(−s) ds`.
    Hum,
}

/// Normalized static Gram matrix `(2π)^{-1} ⟨G e_{k₂}, G e_{k₁}⟩` of the
/// mean-corrected operator on the exponentials `e_k` along its axis.
pub fn static_gram(profile: &ControlProfile, freqs: &[i64]) -> DMatrix<Complex64> {
    let inv = 1.0 / (2.0 * std::f64::consts::PI);
    let g2_0 = profile.square_moment(0);
    let n = freqs.len();
    DMatrix::from_fn(n, n, |i, j| {
        let (k1, k2) = (freqs[i], freqs[j]);
        let (m1, m2) = (profile.moment(k1), profile.moment(k2));
        (profile.square_moment(k2 - k1) - m1.conj() * profile.square_moment(k2) - m2 * profile.square_moment(-k1)
            + m1.conj() * m2 * g2_0)
            * inv
    })
}

/// Normalized Gram matrix `(2π)^{-1} ∫ g² e^{i(k₂−k₁)x}` of plain
/// multiplication by `g`.
pub fn multiplication_gram(profile: &ControlProfile, freqs: &[i64]) -> DMatrix<Complex64> {
    let inv = 1.0 / (2.0 * std::f64::consts::PI);
    let n = freqs.len();
    DMatrix::from_fn(n, n, |i, j| profile.square_moment(freqs[j] - freqs[i]) * inv)
}

/// Hermitian block of a time Gramian at one fixed index of the other axis.
#[derive(Debug, Clone)]
pub struct GramianBlock {
    pub axis: Axis,
    pub direction: Direction,
    /// `l` for vertical control, `k` for horizontal control.
    pub fixed: i64,
    /// Frequencies along the control axis, in matrix order.
    pub freqs: Vec<i64>,
    pub horizon: f64,
    pub matrix: DMatrix<Complex64>,
    /// Relative hermiticity defect of the entries as assembled, before the
    /// block was symmetrized.
    pub assembly_defect: f64,
}

fn block_omega(axis: Axis, fixed: i64, f: i64, p: &DispersionParams) -> f64 {
    match axis {
        Axis::Vertical => omega_unchecked(f, fixed, p),
        Axis::Horizontal => omega_unchecked(fixed, f, p),
    }
}

/// Time-weighted block from a static Gram matrix.
pub fn weight_by_time(
    gram: &DMatrix<Complex64>,
    omegas: &[f64],
    horizon: f64,
    direction: Direction,
) -> DMatrix<Complex64> {
    let n = omegas.len();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = match direction {
            Direction::Observability => omegas[j] - omegas[i],
            Direction::Hum => omegas[i] - omegas[j],
        };
        gram[(i, j)] * time_factor(delta, horizon)
    })
}

/// `‖B − B*‖_max / ‖B‖_max`.
pub fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let max = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    if max == 0.0 {
        0.0
    } else {
        dev / max
    }
}

fn check_hermitian(m: &DMatrix<Complex64>) -> Result<f64> {
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::Numerical(format!("Gramian block not hermitian: relative deviation {dev:e}")));
    }
    Ok(dev)
}

fn symmetrize(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

impl GramianBlock {
    /// Assembles the block; `freqs` must avoid the excluded frequencies
    /// (`k = 0` for vertical control).
    pub fn assemble(
        op: &ControlOperator,
        fixed: i64,
        freqs: &[i64],
        horizon: f64,
        p: &DispersionParams,
        direction: Direction,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::param(format!("horizon must be positive, got {horizon}")));
        }
        if freqs.is_empty() {
            return Err(Error::param("Gramian block needs at least one frequency"));
        }
        match op.axis {
            Axis::Vertical if freqs.contains(&0) => {
                return Err(Error::Domain("vertical Gramian blocks exclude k = 0".into()))
            }
            Axis::Horizontal if fixed == 0 => {
                return Err(Error::Domain("horizontal Gramian blocks need k != 0".into()))
            }
            Axis::Horizontal if p.mode != Mode::Full2D => {
                return Err(Error::dim("horizontal control needs the 2D dispersion relation"))
            }
            _ => {}
        }
        let gram = static_gram(&op.profile, freqs);
        let omegas: Vec<f64> = freqs.iter().map(|&f| block_omega(op.axis, fixed, f, p)).collect();
        let mut matrix = weight_by_time(&gram, &omegas, horizon, direction);
        let assembly_defect = check_hermitian(&matrix)?;
        symmetrize(&mut matrix);
        Ok(Self { axis: op.axis, direction, fixed, freqs: freqs.to_vec(), horizon, matrix, assembly_defect })
    }

    pub fn dim(&self) -> usize {
        self.freqs.len()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|c| c.re).sum()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Smallest eigenvalue and a unit eigenvector.
    pub fn min_eigenpair(&self) -> (f64, Vec<Complex64>) {
        let eig = self.matrix.clone().symmetric_eigen();
        let (i, &lam) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty block");
        (lam, eig.eigenvectors.column(i).iter().copied().collect())
    }

    /// Fails if an eigenvalue lies below `−PSD_TOL · trace / dim`.
    pub fn check_psd(&self) -> Result<f64> {
        let lam = self.eigenvalues()[0];
        let floor = -PSD_TOL * self.trace().abs() / self.dim() as f64;
        if lam < floor {
            return Err(Error::Numerical(format!(
                "Gramian block at fixed index {} has eigenvalue {lam:e} below {floor:e}",
                self.fixed
            )));
        }
        Ok(lam)
    }

    /// `c* B c` for coefficients in matrix order.
    pub fn quadratic_form(&self, c: &[Complex64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(c);
        (v.adjoint() * &self.matrix * &v)[(0, 0)].re
    }

    pub fn apply_vec(&self, c: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(c);
        (&self.matrix * v).iter().copied().collect()
    }
}

/// Vertical-control observability block at transverse frequency `l` over
/// `0 < |k| ≤ K`.
pub fn assemble_observability_gramian(
    horizon: f64,
    kmax: i64,
    l: i64,
    g: &ControlProfile,
    p: &DispersionParams,
) -> Result<GramianBlock> {
    if kmax < 1 {
        return Err(Error::param("Gramian window needs K >= 1"));
    }
    let grid = g.grid();
    if kmax > grid.kmax() {
        return Err(Error::Truncation(format!(
            "K = {kmax} exceeds the profile grid window |k| <= {}",
            grid.kmax()
        )));
    }
    let op = ControlOperator::vertical(g.clone());
    let freqs = Window::new(kmax, 0).x_freqs();
    GramianBlock::assemble(&op, l, &freqs, horizon, p, Direction::Observability)
}

/// All blocks over `window`: one per `l` (vertical) or per `k`
/// (horizontal), assembled in parallel and returned in index order.
pub fn assemble_blocks(
    op: &ControlOperator,
    window: Window,
    horizon: f64,
    p: &DispersionParams,
    direction: Direction,
) -> Result<Vec<GramianBlock>> {
    let (fixed, freqs) = match op.axis {
        Axis::Vertical => (window.y_freqs(), window.x_freqs()),
        Axis::Horizontal => (window.x_freqs(), window.y_freqs()),
    };
    if op.axis == Axis::Vertical {
        let pg = op.profile.grid();
        if window.kmax > pg.kmax() {
            return Err(Error::Truncation(format!("window |k| <= {} exceeds profile grid", window.kmax)));
        }
    }
    fixed
        .par_iter()
        .map(|&f| GramianBlock::assemble(op, f, &freqs, horizon, p, direction))
        .collect()
}

/// Smallest eigenvalue over all blocks (the inverse of the truncated
/// observability constant); every block must pass the PSD check.
pub fn observability_constant(blocks: &[GramianBlock]) -> Result<f64> {
    if blocks.is_empty() {
        return Err(Error::param("no Gramian blocks supplied"));
    }
    let mins: Vec<f64> = blocks.par_iter().map(|b| b.check_psd()).collect::<Result<_>>()?;
    Ok(mins.into_iter().fold(f64::INFINITY, f64::min))
}

/// Smallest eigenvalue per block, in block order.
pub fn block_minima(blocks: &[GramianBlock]) -> Result<Vec<(i64, f64)>> {
    blocks.par_iter().map(|b| Ok((b.fixed, b.check_psd()?))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum RatioMethod {
    /// Exact time factors on the support of the datum.
    Gramian,
    /// Composite Gauss–Legendre in time; `None` resolves the datum's
    /// frequency spread automatically.
    Quadrature(Option<usize>),
}

fn check_datum(u0: &SpectralField, op: &ControlOperator, p: &DispersionParams) -> Result<f64> {
    op.check_grid(u0.grid())?;
    if u0.grid().dim() == Dim::Two && p.mode == Mode::Reduced1D {
        return Err(Error::dim("reduced dispersion applied to a 2D field"));
    }
    u0.check_mean_zero()?;
    let n2 = u0.coeff_norm_sqr();
    if n2 == 0.0 {
        return Err(Error::ZeroDatum);
    }
    Ok(n2)
}

/// Groups the nonzero coefficients by the fixed index of `axis`.
fn support_groups(u0: &SpectralField, axis: Axis) -> Vec<(i64, Vec<i64>, Vec<Complex64>)> {
    let grid = *u0.grid();
    let mut groups: std::collections::BTreeMap<i64, (Vec<i64>, Vec<Complex64>)> = Default::default();
    for (k, l, c) in u0.iter_modes() {
        if c == Complex64::new(0.0, 0.0) || k == 0 || grid.is_nyquist(k, l) {
            continue;
        }
        let (fixed, f) = match axis {
            Axis::Vertical => (l, k),
            Axis::Horizontal => (k, l),
        };
        let e = groups.entry(fixed).or_default();
        e.0.push(f);
        e.1.push(c);
    }
    groups.into_iter().map(|(f, (fr, c))| (f, fr, c)).collect()
}

/// `∫₀^T ‖G S(t)u₀‖² dt / ‖u₀‖²`.
pub fn observability_ratio(
    u0: &SpectralField,
    horizon: f64,
    op: &ControlOperator,
    p: &DispersionParams,
    method: &RatioMethod,
) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::param(format!("horizon must be positive, got {horizon}")));
    }
    let n2 = check_datum(u0, op, p)?;
    match method {
        RatioMethod::Gramian => {
            let groups = support_groups(u0, op.axis);
            let mut acc = 0.0;
            for (fixed, freqs, c) in groups {
                let block = GramianBlock::assemble(op, fixed, &freqs, horizon, p, Direction::Observability)?;
                acc += block.quadratic_form(&c);
            }
            Ok(acc / n2)
        }
        RatioMethod::Quadrature(nodes) => {
            let quad = match nodes {
                Some(n) => TimeQuadrature::with_nodes(horizon, *n)?,
                None => TimeQuadrature::for_bandwidth(horizon, frequency_spread(u0, p), 24.0)?,
            };
            let grid = *u0.grid();
            let plan = FourierPlan::new(grid);
            let vol = grid.volume() / grid.len() as f64;
            let mut acc = 0.0;
            for (t, w) in quad.nodes.iter().zip(&quad.weights) {
                let u = crate::propagator::evolve(u0, *t, p)?;
                let mut data = plan.inverse(&u)?;
                op.apply_physical(&grid, &mut data)?;
                acc += w * vol * data.iter().map(|c| c.norm_sqr()).sum::<f64>();
            }
            Ok(acc / (grid.volume() * n2))
        }
    }
}

/// Largest frequency difference among the nonzero modes of `u`.
pub fn frequency_spread(u: &SpectralField, p: &DispersionParams) -> f64 {
    let grid = *u.grid();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (k, l, c) in u.iter_modes() {
        if c != Complex64::new(0.0, 0.0) && k != 0 && !grid.is_nyquist(k, l) {
            let w = omega_unchecked(k, l, p);
            lo = lo.min(w);
            hi = hi.max(w);
        }
    }
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Applies the per-block Gramian to a field; modes outside the blocks'
/// frequencies map to zero.
pub fn apply_blocks(blocks: &[GramianBlock], v: &SpectralField) -> Result<SpectralField> {
    let mut out = SpectralField::zeros(*v.grid());
    for b in blocks {
        let idx = block_indices(b, v.grid())?;
        let c: Vec<Complex64> = idx.iter().map(|&i| v.coeffs()[i]).collect();
        let r = b.apply_vec(&c);
        for (&i, val) in idx.iter().zip(r) {
            out.coeffs_mut()[i] = val;
        }
    }
    Ok(out)
}

/// Storage indices of a block's modes in `grid`.
pub fn block_indices(b: &GramianBlock, grid: &TorusGrid) -> Result<Vec<usize>> {
    b.freqs
        .iter()
        .map(|&f| {
            let (k, l) = match b.axis {
                Axis::Vertical => (f, b.fixed),
                Axis::Horizontal => (b.fixed, f),
            };
            grid.index_of(k, l)
                .ok_or_else(|| Error::Truncation(format!("mode ({k}, {l}) outside the field grid")))
        })
        .collect()
}

/// Matrix-free time-quadrature evaluation of a Gramian on a window, with
/// `G²` applied to grid samples. Serves as an oracle for the closed-form
/// blocks.
#[derive(Debug, Clone)]
pub struct QuadratureApplicator {
    pub op: ControlOperator,
    pub params: DispersionParams,
    pub window: Window,
    pub grid: TorusGrid,
    pub quadrature: TimeQuadrature,
    pub direction: Direction,
}

impl QuadratureApplicator {
    /// Resolves every frequency difference inside the window.
    pub fn new(
        op: ControlOperator,
        params: DispersionParams,
        window: Window,
        grid: TorusGrid,
        horizon: f64,
        direction: Direction,
    ) -> Result<Self> {
        window.fits(&grid)?;
        op.check_grid(&grid)?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for l in window.y_freqs() {
            for k in window.x_freqs() {
                let w = omega_unchecked(k, l, &params);
                lo = lo.min(w);
                hi = hi.max(w);
            }
        }
        let quadrature = TimeQuadrature::for_bandwidth(horizon, hi - lo, 24.0)?;
        Ok(Self { op, params, window, grid, quadrature, direction })
    }

    pub fn with_quadrature(mut self, quadrature: TimeQuadrature) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn apply(&self, v: &SpectralField) -> Result<SpectralField> {
        Ok(self.apply_many(std::slice::from_ref(v))?.remove(0))
    }

    /// Applies the operator to every field, sharing phase tables per node.
    pub fn apply_many(&self, vs: &[SpectralField]) -> Result<Vec<SpectralField>> {
        for v in vs {
            if *v.grid() != self.grid {
                return Err(Error::dim("field grid differs from the applicator grid"));
            }
            v.check_mean_zero()?;
        }
        let plan = FourierPlan::new(self.grid);
        let nx = self.grid.nx();
        let modes: Vec<(usize, f64)> = (0..self.grid.len())
            .filter_map(|i| {
                let (k, l) = (self.grid.k_of(i % nx), self.grid.l_of(i / nx));
                self.window.contains(k, l).then(|| (i, omega_unchecked(k, l, &self.params)))
            })
            .collect();
        let sign = match self.direction {
            Direction::Observability => 1.0,
            Direction::Hum => -1.0,
        };
        let mut acc = vec![vec![Complex64::new(0.0, 0.0); modes.len()]; vs.len()];
        let mut phases = vec![Complex64::new(0.0, 0.0); modes.len()];
        let mut data = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (&t, &w) in self.quadrature.nodes.iter().zip(&self.quadrature.weights) {
            for (ph, &(_, om)) in phases.iter_mut().zip(&modes) {
                *ph = phase_factor(sign * t, om);
            }
            for (v, a) in vs.iter().zip(acc.iter_mut()) {
                data.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                for (&(i, _), ph) in modes.iter().zip(&phases) {
                    data[i] = v.coeffs()[i] * ph;
                }
                plan.inverse_in_place(&mut data)?;
                self.op.apply_physical(&self.grid, &mut data)?;
                self.op.apply_physical(&self.grid, &mut data)?;
                plan.forward_in_place(&mut data)?;
                for ((&(i, _), ph), ai) in modes.iter().zip(&phases).zip(a.iter_mut()) {
                    *ai += w * data[i] * ph.conj();
                }
            }
        }
        acc.into_iter()
            .map(|a| {
                let mut out = SpectralField::zeros(self.grid);
                for (&(i, _), val) in modes.iter().zip(a) {
                    out.coeffs_mut()[i] = val;
                }
                Ok(out)
            })
            .collect()
    }

    /// Smallest eigenvalue of the operator on the window modes (`k ≠ 0`),
    /// from the dense matrix assembled column by column. Meant for small
    /// windows, typically one transverse slice on a 1D grid.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut basis_modes = Vec::new();
        for l in self.window.y_freqs() {
            for k in self.window.x_freqs() {
                basis_modes.push((k, l));
            }
        }
        let basis: Vec<SpectralField> =
            basis_modes.iter().map(|&(k, l)| SpectralField::mode(self.grid, k, l)).collect::<Result<_>>()?;
        let cols = self.apply_many(&basis)?;
        let n = basis_modes.len();
        let mut m = DMatrix::from_fn(n, n, |i, j| cols[j].get(basis_modes[i].0, basis_modes[i].1));
        check_hermitian(&m)?;
        symmetrize(&mut m);
        Ok(m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
    }
}
