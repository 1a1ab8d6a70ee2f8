//! Gauss–Legendre rules on time intervals and adaptive Gauss–Kronrod
//! integration on finite intervals.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// A composite Gauss–Legendre rule on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeQuadrature {
    pub horizon: f64,
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TimeQuadrature {
    pub fn composite(horizon: f64, panels: usize, order: usize) -> Result<Self> {
        if !(horizon > 0.0) || panels == 0 || order == 0 {
            return Err(Error::param(format!(
                "time quadrature needs horizon > 0, panels >= 1, order >= 1 (got {horizon}, {panels}, {order})"
            )));
        }
        let (x, w) = gauss_legendre(order);
        let len = horizon / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * len;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + 0.5 * len * xi);
                weights.push(0.5 * len * wi);
            }
        }
        Ok(Self { horizon, order, nodes, weights })
    }

    /// About `total` nodes in panels of at most 32.
    pub fn with_nodes(horizon: f64, total: usize) -> Result<Self> {
        let panels = total.div_ceil(32).max(1);
        Self::composite(horizon, panels, total.div_ceil(panels))
    }

    /// Resolves `e^{iΔt}` for `|Δ| ≤ bandwidth`: order-32 panels spanning at
    /// most `radians` of phase each.
    pub fn for_bandwidth(horizon: f64, bandwidth: f64, radians: f64) -> Result<Self> {
        let panels = ((horizon * bandwidth.abs() / radians).ceil() as usize).max(1);
        Self::composite(horizon, panels, 32)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same layout with twice as many panels.
    pub fn refined(&self) -> Result<Self> {
        let panels = self.nodes.len() / self.order;
        Self::composite(self.horizon, 2 * panels, self.order)
    }
}

const GK_XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WK[7];
    let mut g = fc * GK_WG[3];
    for i in 0..7 {
        let s = f(c - r * GK_XK[i]) + f(c + r * GK_XK[i]);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * r, ((k - g) * r).abs())
}

/// Adaptive 7/15-point Gauss–Kronrod integration to absolute tolerance
/// `tol`; returns the value and the summed error estimate.
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    if !(a.is_finite() && b.is_finite()) || !(tol > 0.0) {
        return Err(Error::param("adaptive quadrature needs finite limits and positive tolerance"));
    }
    if a == b {
        return Ok((0.0, 0.0));
    }
    let (v, e) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut evaluations = 1usize;
    loop {
        let total_err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if total_err <= tol {
            break;
        }
        if evaluations > 20_000 {
            return Err(Error::Numerical(format!(
                "adaptive quadrature on [{a}, {b}] stalled at error estimate {total_err:e}"
            )));
        }
        let (imax, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = intervals.swap_remove(imax);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        evaluations += 2;
    }
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let value = intervals.iter().map(|iv| iv.2).sum();
    let err = intervals.iter().map(|iv| iv.3).sum();
    Ok((value, err))
}
