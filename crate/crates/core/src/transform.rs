//! Grid samples ↔ Fourier coefficients.
//!
//! With nodes at `x_j = -π + 2πj/n` the coefficient of frequency `k` is
//! `(1/n) Σ_j f_j e^{-ikx_j} = (-1)^k FFT(f)[k] / n`; the sign comes from the
//! shifted origin and equals `(-1)^index` in FFT storage order.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::{Dim, TorusGrid};

/// Cached forward and inverse plans for one grid.
#[derive(Clone)]
pub struct FourierPlan {
    grid: TorusGrid,
    fx: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    fy: Option<Arc<dyn Fft<f64>>>,
    iy: Option<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierPlan").field("grid", &self.grid).finish()
    }
}

fn alternate(v: &mut [Complex64]) {
    v.iter_mut().skip(1).step_by(2).for_each(|c| *c = -*c);
}

impl FourierPlan {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let fx = planner.plan_fft_forward(grid.nx());
        let ix = planner.plan_fft_inverse(grid.nx());
        let (fy, iy) = match grid.dim() {
            Dim::One => (None, None),
            Dim::Two => (Some(planner.plan_fft_forward(grid.ny())), Some(planner.plan_fft_inverse(grid.ny()))),
        };
        Self { grid, fx, ix, fy, iy }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.grid.len() {
            return Err(Error::dim(format!(
                "sample array has length {len}, grid {}x{} needs {}",
                self.grid.nx(),
                self.grid.ny(),
                self.grid.len()
            )));
        }
        Ok(())
    }

    /// In-place transform of samples into coefficients.
    pub fn forward_in_place(&self, data: &mut [Complex64]) -> Result<()> {
        self.check_len(data.len())?;
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        for row in data.chunks_exact_mut(nx) {
            self.fx.process(row);
            alternate(row);
        }
        if let Some(fy) = &self.fy {
            self.columns(data, fy.as_ref(), true);
        }
        let s = 1.0 / (nx * ny) as f64;
        data.iter_mut().for_each(|c| *c *= s);
        Ok(())
    }

    /// In-place synthesis of grid samples from coefficients.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) -> Result<()> {
        self.check_len(data.len())?;
        let nx = self.grid.nx();
        for row in data.chunks_exact_mut(nx) {
            alternate(row);
            self.ix.process(row);
        }
        if let Some(iy) = &self.iy {
            self.columns(data, iy.as_ref(), false);
        }
        Ok(())
    }

    /// Applies the sign-corrected y transform to every column.
    fn columns(&self, data: &mut [Complex64], fft: &dyn Fft<f64>, forward: bool) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut col = vec![Complex64::new(0.0, 0.0); ny];
        for c in 0..nx {
            for r in 0..ny {
                col[r] = data[r * nx + c];
            }
            if !forward {
                alternate(&mut col);
            }
            fft.process(&mut col);
            if forward {
                alternate(&mut col);
            }
            for r in 0..ny {
                data[r * nx + c] = col[r];
            }
        }
    }

    pub fn forward(&self, samples: &[Complex64]) -> Result<SpectralField> {
        let mut data = samples.to_vec();
        self.forward_in_place(&mut data)?;
        SpectralField::from_coeffs(self.grid, data)
    }

    pub fn inverse(&self, field: &SpectralField) -> Result<Vec<Complex64>> {
        if *field.grid() != self.grid {
            return Err(Error::dim("field grid differs from the plan grid"));
        }
        let mut data = field.coeffs().to_vec();
        self.inverse_in_place(&mut data)?;
        Ok(data)
    }
}

/// One-shot forward transform; build a [`FourierPlan`] for repeated use.
pub fn forward_transform(samples: &[Complex64], grid: TorusGrid) -> Result<SpectralField> {
    FourierPlan::new(grid).forward(samples)
}

pub fn inverse_transform(field: &SpectralField) -> Result<Vec<Complex64>> {
    FourierPlan::new(*field.grid()).inverse(field)
}

/// Samples a function of `(x, y)` on the grid nodes (row-major, y outer).
pub fn sample_grid(grid: &TorusGrid, f: impl Fn(f64, f64) -> Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(grid.len());
    for r in 0..grid.ny() {
        let y = if grid.dim() == Dim::Two { grid.y_node(r) } else { 0.0 };
        for c in 0..grid.nx() {
            out.push(f(grid.x_node(c), y));
        }
    }
    out
}
