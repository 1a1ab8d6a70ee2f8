//! Uniform grids on the torus `[-π, π)^d` and their frequency windows.
//!
//! Node `j` sits at `x_j = -π + 2πj/n`. Coefficient storage follows FFT order:
//! index `j` holds frequency `j` for `j < n/2` and `j - n` otherwise, so index
//! `n/2` is the unpaired Nyquist frequency `-n/2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn as_u32(self) -> u32 {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: Dim,
    nx: usize,
    ny: usize,
}

fn check_size(n: usize, axis: &str) -> Result<()> {
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::param(format!(
            "{axis} sample count must be a power of two >= 4, got {n}"
        )));
    }
    Ok(())
}

impl TorusGrid {
    pub fn one_d(nx: usize) -> Result<Self> {
        check_size(nx, "nx")?;
        Ok(Self { dim: Dim::One, nx, ny: 1 })
    }

    pub fn two_d(nx: usize, ny: usize) -> Result<Self> {
        check_size(nx, "nx")?;
        check_size(ny, "ny")?;
        Ok(Self { dim: Dim::Two, nx, ny })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Number of transverse samples; 1 for a one-dimensional grid.
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(2π)^d`, the ratio between `L²` norms and coefficient sums.
    pub fn volume(&self) -> f64 {
        match self.dim {
            Dim::One => 2.0 * PI,
            Dim::Two => 4.0 * PI * PI,
        }
    }

    /// Largest `|k|` inside the evolution window (Nyquist excluded).
    pub fn kmax(&self) -> i64 {
        self.nx as i64 / 2 - 1
    }

    pub fn lmax(&self) -> i64 {
        match self.dim {
            Dim::One => 0,
            Dim::Two => self.ny as i64 / 2 - 1,
        }
    }

    pub fn x_node(&self, j: usize) -> f64 {
        -PI + 2.0 * PI * j as f64 / self.nx as f64
    }

    pub fn y_node(&self, j: usize) -> f64 {
        -PI + 2.0 * PI * j as f64 / self.ny as f64
    }

    pub fn k_of(&self, col: usize) -> i64 {
        freq_of(col, self.nx)
    }

    pub fn l_of(&self, row: usize) -> i64 {
        if self.dim == Dim::One {
            0
        } else {
            freq_of(row, self.ny)
        }
    }

    /// Storage column of x-frequency `k`, if `k` lies in `[-nx/2, nx/2)`.
    pub fn col_of(&self, k: i64) -> Option<usize> {
        index_of(k, self.nx)
    }

    pub fn row_of(&self, l: i64) -> Option<usize> {
        match self.dim {
            Dim::One => (l == 0).then_some(0),
            Dim::Two => index_of(l, self.ny),
        }
    }

    pub fn index_of(&self, k: i64, l: i64) -> Option<usize> {
        Some(self.row_of(l)? * self.nx + self.col_of(k)?)
    }

    pub fn is_nyquist(&self, k: i64, l: i64) -> bool {
        k == -(self.nx as i64) / 2 || (self.dim == Dim::Two && l == -(self.ny as i64) / 2)
    }

    /// The 1D grid of the x axis.
    pub fn x_grid(&self) -> TorusGrid {
        TorusGrid { dim: Dim::One, nx: self.nx, ny: 1 }
    }

    /// The 1D grid of the y axis; only meaningful for 2D grids.
    pub fn y_grid(&self) -> Result<TorusGrid> {
        match self.dim {
            Dim::One => Err(Error::dim("a 1D grid has no y axis")),
            Dim::Two => Ok(TorusGrid { dim: Dim::One, nx: self.ny, ny: 1 }),
        }
    }
}

pub fn freq_of(index: usize, n: usize) -> i64 {
    if index < n / 2 {
        index as i64
    } else {
        index as i64 - n as i64
    }
}

pub fn index_of(freq: i64, n: usize) -> Option<usize> {
    let half = n as i64 / 2;
    (-half..half).contains(&freq).then(|| freq.rem_euclid(n as i64) as usize)
}

/// Smallest admissible grid size holding frequencies up to `|k| <= kmax`
/// without touching Nyquist.
pub fn grid_size_for(kmax: i64) -> usize {
    (2 * kmax as usize + 2).next_power_of_two().max(4)
}

/// Rectangular frequency window `|k| <= kmax`, `|l| <= lmax`, `k != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub kmax: i64,
    pub lmax: i64,
}

impl Window {
    pub fn new(kmax: i64, lmax: i64) -> Self {
        Self { kmax, lmax }
    }

    pub fn full(grid: &TorusGrid) -> Self {
        Self { kmax: grid.kmax(), lmax: grid.lmax() }
    }

    pub fn fits(&self, grid: &TorusGrid) -> Result<()> {
        if self.kmax < 1 || self.lmax < 0 {
            return Err(Error::param(format!("empty window {self:?}")));
        }
        if self.kmax > grid.kmax() || self.lmax > grid.lmax() {
            return Err(Error::Truncation(format!(
                "window |k| <= {}, |l| <= {} exceeds grid {}x{} (|k| <= {}, |l| <= {})",
                self.kmax,
                self.lmax,
                grid.nx(),
                grid.ny(),
                grid.kmax(),
                grid.lmax()
            )));
        }
        Ok(())
    }

    pub fn x_freqs(&self) -> Vec<i64> {
        (-self.kmax..=self.kmax).filter(|&k| k != 0).collect()
    }

    pub fn y_freqs(&self) -> Vec<i64> {
        (-self.lmax..=self.lmax).collect()
    }

    pub fn contains(&self, k: i64, l: i64) -> bool {
        k != 0 && k.abs() <= self.kmax && l.abs() <= self.lmax
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(TorusGrid::one_d(2).is_err());
        assert!(TorusGrid::one_d(12).is_err());
        assert!(TorusGrid::two_d(16, 6).is_err());
        assert!(TorusGrid::two_d(16, 8).is_ok());
    }

    #[test]
    fn frequency_index_bijection() {
        let g = TorusGrid::two_d(16, 8).unwrap();
        for row in 0..g.ny() {
            for col in 0..g.nx() {
                let (k, l) = (g.k_of(col), g.l_of(row));
                assert!((-8..8).contains(&k) && (-4..4).contains(&l));
                assert_eq!(g.index_of(k, l), Some(row * g.nx() + col));
            }
        }
        assert_eq!(g.col_of(8), None);
        assert!(g.is_nyquist(-8, 0));
        assert!(g.is_nyquist(1, -4));
    }

    #[test]
    fn nodes_start_at_minus_pi() {
        let g = TorusGrid::one_d(8).unwrap();
        assert_eq!(g.x_node(0), -PI);
        assert!((g.x_node(4)).abs() < 1e-15);
    }

    #[test]
    fn window_checks() {
        let g = TorusGrid::two_d(32, 8).unwrap();
        assert!(Window::new(15, 3).fits(&g).is_ok());
        assert!(matches!(Window::new(16, 3).fits(&g), Err(Error::Truncation(_))));
        assert_eq!(Window::new(2, 0).x_freqs(), vec![-2, -1, 1, 2]);
        assert_eq!(grid_size_for(16), 64);
        assert_eq!(grid_size_for(15), 32);
    }
}
