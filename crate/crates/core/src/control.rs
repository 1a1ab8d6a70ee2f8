//! Control profiles and the mean-corrected localization operators
//! `G h = g(x)(h − ∫ g(x')h(x', y) dx')` and its transverse counterpart.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::{Dim, TorusGrid};
use crate::transform::FourierPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// `exp(−1/(4t(1−t)))` on the unit interval; `C^∞`.
    SmoothExp,
    /// `sin⁴(πt)`; `C³`.
    HannSquared,
}

impl ProfileKind {
    /// Unnormalized shape at relative position `t ∈ (0, 1)`, zero outside.
    pub fn shape(self, t: f64) -> f64 {
        if !(t > 0.0 && t < 1.0) {
            return 0.0;
        }
        match self {
            ProfileKind::SmoothExp => (-1.0 / (4.0 * t * (1.0 - t))).exp(),
            ProfileKind::HannSquared => (PI * t).sin().powi(4),
        }
    }
}

/// A nonnegative bump `g` with trapezoid integral 1, tabulated on a 1D grid.
#[derive(Debug, Clone)]
pub struct ControlProfile {
    intervals: Vec<(f64, f64)>,
    kind: ProfileKind,
    grid: TorusGrid,
    normalization: f64,
    samples: Vec<f64>,
    g_hat: Vec<Complex64>,
    g2_hat: Vec<Complex64>,
}

impl ControlProfile {
    /// Single bump supported on `[a, b]`.
    pub fn new(a: f64, b: f64, kind: ProfileKind, grid: TorusGrid) -> Result<Self> {
        Self::from_intervals(&[(a, b)], kind, grid)
    }

    /// Sum of bumps over disjoint intervals, normalized jointly.
    pub fn from_intervals(intervals: &[(f64, f64)], kind: ProfileKind, grid: TorusGrid) -> Result<Self> {
        if grid.dim() != Dim::One {
            return Err(Error::dim("control profiles live on a 1D grid"));
        }
        if intervals.is_empty() {
            return Err(Error::param("control profile needs at least one interval"));
        }
        let mut sorted = intervals.to_vec();
        sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (i, &(a, b)) in sorted.iter().enumerate() {
            if !(a.is_finite() && b.is_finite()) || a < -PI || b > PI || a >= b {
                return Err(Error::param(format!("control interval ({a}, {b}) must satisfy -pi <= a < b <= pi")));
            }
            if i > 0 && a < sorted[i - 1].1 {
                return Err(Error::param("control intervals overlap"));
            }
        }
        let raw: Vec<f64> = (0..grid.nx()).map(|j| raw_shape(&sorted, kind, grid.x_node(j))).collect();
        let sum: f64 = raw.iter().sum();
        if sum == 0.0 {
            return Err(Error::param(format!(
                "control support {sorted:?} contains no interior grid node at nx = {}",
                grid.nx()
            )));
        }
        let normalization = grid.nx() as f64 / (2.0 * PI * sum);
        let samples: Vec<f64> = raw.iter().map(|v| v * normalization).collect();
        let plan = FourierPlan::new(grid);
        let g_hat = plan.forward(&samples.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>())?.into_coeffs();
        let g2_hat = plan.forward(&samples.iter().map(|&v| Complex64::new(v * v, 0.0)).collect::<Vec<_>>())?.into_coeffs();
        Ok(Self { intervals: sorted, kind, grid, normalization, samples, g_hat, g2_hat })
    }

    /// Smooth-exp bump on `(π/4, 3π/4)`.
    pub fn default_for(grid: TorusGrid) -> Result<Self> {
        Self::new(PI / 4.0, 3.0 * PI / 4.0, ProfileKind::SmoothExp, grid)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Factor applied to the raw shape so the trapezoid integral is 1.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Unnormalized shape at an arbitrary point.
    pub fn raw_value(&self, x: f64) -> f64 {
        raw_shape(&self.intervals, self.kind, x)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.normalization * self.raw_value(x)
    }

    /// Coefficient `ĝ(k)` (index taken modulo the grid size).
    pub fn g_hat(&self, k: i64) -> Complex64 {
        self.g_hat[k.rem_euclid(self.grid.nx() as i64) as usize]
    }

    /// Coefficient of `g²` at `k` (modulo the grid size).
    pub fn g2_hat(&self, k: i64) -> Complex64 {
        self.g2_hat[k.rem_euclid(self.grid.nx() as i64) as usize]
    }

    /// `∫ g e^{ikx} dx` under the grid quadrature.
    pub fn moment(&self, k: i64) -> Complex64 {
        2.0 * PI * self.g_hat(-k)
    }

    /// `∫ g² e^{iqx} dx` under the grid quadrature.
    pub fn square_moment(&self, q: i64) -> Complex64 {
        2.0 * PI * self.g2_hat(-q)
    }

    pub fn integral(&self) -> f64 {
        2.0 * PI / self.grid.nx() as f64 * self.samples.iter().sum::<f64>()
    }

    pub fn max_value(&self) -> f64 {
        self.samples.iter().copied().fold(0.0, f64::max)
    }
}

fn raw_shape(intervals: &[(f64, f64)], kind: ProfileKind, x: f64) -> f64 {
    intervals
        .iter()
        .map(|&(a, b)| kind.shape((x - a) / (b - a)))
        .sum()
}

pub fn make_control_profile(a: f64, b: f64, kind: ProfileKind, grid: TorusGrid) -> Result<ControlProfile> {
    ControlProfile::new(a, b, kind, grid)
}

/// Direction in which the control localizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// `g = g(x)`, mean correction in x; couples x-frequencies at fixed `l`.
    Vertical,
    /// `g = g(y)`, mean correction in y; couples `l` at fixed `k`.
    Horizontal,
}

#[derive(Debug, Clone)]
pub struct ControlOperator {
    pub axis: Axis,
    pub profile: ControlProfile,
}

impl ControlOperator {
    pub fn vertical(profile: ControlProfile) -> Self {
        Self { axis: Axis::Vertical, profile }
    }

    pub fn horizontal(profile: ControlProfile) -> Self {
        Self { axis: Axis::Horizontal, profile }
    }

    pub fn apply(&self, u: &SpectralField) -> Result<SpectralField> {
        let plan = FourierPlan::new(*u.grid());
        self.apply_with(&plan, u)
    }

    pub fn apply_with(&self, plan: &FourierPlan, u: &SpectralField) -> Result<SpectralField> {
        let mut data = plan.inverse(u)?;
        self.apply_physical(u.grid(), &mut data)?;
        plan.forward(&data)
    }

    /// Applies the operator to grid samples in place.
    pub fn apply_physical(&self, grid: &TorusGrid, data: &mut [Complex64]) -> Result<()> {
        self.check_grid(grid)?;
        let g = &self.profile.samples;
        match self.axis {
            Axis::Vertical => {
                let nx = grid.nx();
                let w = 2.0 * PI / nx as f64;
                for row in data.chunks_exact_mut(nx) {
                    let m: Complex64 = row.iter().zip(g).map(|(u, gi)| u * gi).sum::<Complex64>() * w;
                    for (u, gi) in row.iter_mut().zip(g) {
                        *u = (*u - m) * gi;
                    }
                }
            }
            Axis::Horizontal => {
                let (nx, ny) = (grid.nx(), grid.ny());
                let w = 2.0 * PI / ny as f64;
                for c in 0..nx {
                    let m: Complex64 = (0..ny).map(|r| data[r * nx + c] * g[r]).sum::<Complex64>() * w;
                    for r in 0..ny {
                        let u = &mut data[r * nx + c];
                        *u = (*u - m) * g[r];
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check_grid(&self, grid: &TorusGrid) -> Result<()> {
        let pn = self.profile.grid.nx();
        match self.axis {
            Axis::Vertical if grid.nx() != pn => Err(Error::dim(format!(
                "profile sampled on {pn} points but the field has nx = {}",
                grid.nx()
            ))),
            Axis::Horizontal if grid.dim() != Dim::Two => {
                Err(Error::dim("horizontal control needs a 2D field"))
            }
            Axis::Horizontal if grid.ny() != pn => Err(Error::dim(format!(
                "profile sampled on {pn} points but the field has ny = {}",
                grid.ny()
            ))),
            _ => Ok(()),
        }
    }
}

pub fn apply_vertical_control(u: &SpectralField, g: &ControlProfile) -> Result<SpectralField> {
    ControlOperator::vertical(g.clone()).apply(u)
}

pub fn apply_horizontal_control(u: &SpectralField, g: &ControlProfile) -> Result<SpectralField> {
    ControlOperator::horizontal(g.clone()).apply(u)
}
