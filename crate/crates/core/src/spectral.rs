//! Spectral-inequality constants `κ(m₀) = 1/λ_min(M)` with
//! `M[j,k] = ∫ g² e^{i(k−j)x} dx`, `|j|, |k| ≤ m₀`, under the grid quadrature.
//!
//! For bumps with small support `λ_min` falls by roughly three decades per
//! unit of `m₀`, far below double precision. Well-conditioned cases use an
//! SVD of the weighted Vandermonde factor `A` (`A*A = M`) in `f64`; the rest
//! rebuild `M` from the analytic profile in extended precision and run
//! Cholesky-based inverse iteration, doubling the precision until the
//! eigenvalue clears the rounding floor.

use std::f64::consts::PI;

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::control::{ControlProfile, ProfileKind};
use crate::error::{Error, Result};

/// Smallest `σ_min/σ_max` accepted from the double-precision SVD.
const SVD_CONDITION_FLOOR: f64 = 1e-6;
const START_BITS: usize = 256;
const MAX_BITS: usize = 16_384;
const RM: RoundingMode = RoundingMode::ToEven;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "route", rename_all = "kebab-case")]
pub enum SpectralRoute {
    /// Closed form `1/∫g²` for `m₀ = 0`.
    Scalar,
    Svd,
    Extended { bits: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralConstant {
    pub m0: usize,
    pub kappa: f64,
    pub lambda_min: f64,
    pub route: SpectralRoute,
}

/// The Toeplitz matrix `M` in double precision, indices `−m₀..=m₀`.
pub fn spectral_gram(g: &ControlProfile, m0: usize) -> DMatrix<Complex64> {
    let n = 2 * m0 + 1;
    DMatrix::from_fn(n, n, |j, k| g.square_moment(k as i64 - j as i64))
}

fn support(g: &ControlProfile) -> Vec<usize> {
    g.samples().iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(j, _)| j).collect()
}

pub fn spectral_constant(g: &ControlProfile, m0: usize) -> Result<SpectralConstant> {
    let grid = g.grid();
    if m0 as i64 > grid.kmax() {
        return Err(Error::Truncation(format!(
            "m0 = {m0} exceeds the profile grid window |k| <= {}",
            grid.kmax()
        )));
    }
    let supp = support(g);
    if supp.len() < 2 * m0 + 1 {
        return Err(Error::InfiniteConstant(format!(
            "g is nonzero at {} grid nodes, fewer than the {} coefficients of degree {m0}",
            supp.len(),
            2 * m0 + 1
        )));
    }
    if m0 == 0 {
        let mass = g.square_moment(0).re;
        return Ok(SpectralConstant { m0, kappa: 1.0 / mass, lambda_min: mass, route: SpectralRoute::Scalar });
    }
    let n = grid.nx();
    let w = (2.0 * PI / n as f64).sqrt();
    let samples = g.samples();
    let a = DMatrix::from_fn(supp.len(), 2 * m0 + 1, |r, c| {
        let j = supp[r];
        let k = c as i64 - m0 as i64;
        w * samples[j] * Complex64::new(0.0, k as f64 * grid.x_node(j)).exp()
    });
    let sv = a.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin / smax >= SVD_CONDITION_FLOOR {
        let lam = smin * smin;
        return Ok(SpectralConstant { m0, kappa: 1.0 / lam, lambda_min: lam, route: SpectralRoute::Svd });
    }
    let (lam, bits) = extended_min_eigenvalue(g, m0)?;
    Ok(SpectralConstant { m0, kappa: 1.0 / lam, lambda_min: lam, route: SpectralRoute::Extended { bits } })
}

/// `κ(m)` for `m = 0..=m_max`.
pub fn spectral_constants(g: &ControlProfile, m_max: usize) -> Result<Vec<SpectralConstant>> {
    (0..=m_max).map(|m| spectral_constant(g, m)).collect()
}

/// Smallest eigenvalue of `M` computed in extended precision, and the
/// precision in bits that certified it.
pub fn extended_min_eigenvalue(g: &ControlProfile, m0: usize) -> Result<(f64, usize)> {
    let mut bits = START_BITS;
    let mut cc = Consts::new().map_err(|e| Error::Numerical(format!("extended precision setup: {e:?}")))?;
    loop {
        let m = ExtendedGram::build(g, m0, bits, &mut cc);
        if let Some(lam) = m.min_eigenvalue() {
            let unit = BigFloat::from_f64(2.0, bits).powi(bits - 64, bits, RM);
            let floor = m.trace.div(&unit, bits, RM);
            if lam.cmp(&floor).is_some_and(|c| c > 0) {
                return Ok((to_f64(&lam, &mut cc)?, bits));
            }
        }
        bits *= 2;
        if bits > MAX_BITS {
            return Err(Error::Numerical(format!(
                "smallest eigenvalue at m0 = {m0} not resolved with {MAX_BITS} bits"
            )));
        }
    }
}

fn to_f64(x: &BigFloat, cc: &mut Consts) -> Result<f64> {
    let s = x.format(Radix::Dec, RM, cc).map_err(|e| Error::Numerical(format!("{e:?}")))?;
    s.parse::<f64>().map_err(|e| Error::Numerical(format!("cannot read back {s}: {e}")))
}

#[derive(Clone)]
struct BC {
    re: BigFloat,
    im: BigFloat,
}

impl BC {
    fn zero(p: usize) -> Self {
        Self { re: BigFloat::from_f64(0.0, p), im: BigFloat::from_f64(0.0, p) }
    }
    fn add(&self, o: &Self, p: usize) -> Self {
        Self { re: self.re.add(&o.re, p, RM), im: self.im.add(&o.im, p, RM) }
    }
    fn sub(&self, o: &Self, p: usize) -> Self {
        Self { re: self.re.sub(&o.re, p, RM), im: self.im.sub(&o.im, p, RM) }
    }
    fn mul(&self, o: &Self, p: usize) -> Self {
        Self {
            re: self.re.mul(&o.re, p, RM).sub(&self.im.mul(&o.im, p, RM), p, RM),
            im: self.re.mul(&o.im, p, RM).add(&self.im.mul(&o.re, p, RM), p, RM),
        }
    }
    fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: self.im.neg() }
    }
    fn scale(&self, s: &BigFloat, p: usize) -> Self {
        Self { re: self.re.mul(s, p, RM), im: self.im.mul(s, p, RM) }
    }
    fn norm_sqr(&self, p: usize) -> BigFloat {
        self.re.mul(&self.re, p, RM).add(&self.im.mul(&self.im, p, RM), p, RM)
    }
}

struct ExtendedGram {
    p: usize,
    n: usize,
    m: Vec<BC>,
    trace: BigFloat,
}

fn shape_big(kind: ProfileKind, t: &BigFloat, p: usize, pi: &BigFloat, cc: &mut Consts) -> BigFloat {
    let one = BigFloat::from_f64(1.0, p);
    match kind {
        ProfileKind::SmoothExp => {
            let d = BigFloat::from_f64(4.0, p).mul(t, p, RM).mul(&one.sub(t, p, RM), p, RM);
            one.div(&d, p, RM).neg().exp(p, RM, cc)
        }
        ProfileKind::HannSquared => {
            let s = pi.mul(t, p, RM).sin(p, RM, cc);
            let s2 = s.mul(&s, p, RM);
            s2.mul(&s2, p, RM)
        }
    }
}

impl ExtendedGram {
    fn build(g: &ControlProfile, m0: usize, p: usize, cc: &mut Consts) -> Self {
        let grid = g.grid();
        let nx = grid.nx();
        let pi = cc.pi(p, RM);
        let two_pi = pi.mul(&BigFloat::from_f64(2.0, p), p, RM);
        let nbig = BigFloat::from_u64(nx as u64, p);
        let supp = support(g);
        // Raw shape values at the support nodes.
        let raw: Vec<BigFloat> = supp
            .iter()
            .map(|&j| {
                let x = two_pi.mul(&BigFloat::from_u64(j as u64, p), p, RM).div(&nbig, p, RM).sub(&pi, p, RM);
                let mut acc = BigFloat::from_f64(0.0, p);
                for &(a, b) in g.intervals() {
                    let xf = grid.x_node(j);
                    if xf > a && xf < b {
                        let t = x.sub(&BigFloat::from_f64(a, p), p, RM).div(&BigFloat::from_f64(b - a, p), p, RM);
                        acc = acc.add(&shape_big(g.kind(), &t, p, &pi, cc), p, RM);
                    }
                }
                acc
            })
            .collect();
        let mut sum = BigFloat::from_f64(0.0, p);
        for r in &raw {
            sum = sum.add(r, p, RM);
        }
        // Normalized so (2π/n)Σg = 1; weights are (2π/n) g².
        let c = nbig.div(&two_pi.mul(&sum, p, RM), p, RM);
        let quad = two_pi.div(&nbig, p, RM);
        let weights: Vec<BigFloat> = raw
            .iter()
            .map(|r| {
                let gv = r.mul(&c, p, RM);
                gv.mul(&gv, p, RM).mul(&quad, p, RM)
            })
            .collect();
        // Roots of unity e^{2πi m/n}.
        let roots: Vec<BC> = (0..nx)
            .map(|m| {
                let ang = two_pi.mul(&BigFloat::from_u64(m as u64, p), p, RM).div(&nbig, p, RM);
                BC { re: ang.cos(p, RM, cc), im: ang.sin(p, RM, cc) }
            })
            .collect();
        let size = 2 * m0 + 1;
        // G2(q) = Σ w_j e^{iqx_j} = (−1)^q Σ w_j e^{2πi qj/n}.
        let moments: Vec<BC> = (0..size)
            .map(|q| {
                let mut acc = BC::zero(p);
                for (&j, wj) in supp.iter().zip(&weights) {
                    let r = &roots[(q * j) % nx];
                    acc = acc.add(&r.scale(wj, p), p);
                }
                if q % 2 == 1 {
                    acc = BC { re: acc.re.neg(), im: acc.im.neg() };
                }
                acc
            })
            .collect();
        let mut m = vec![BC::zero(p); size * size];
        for a in 0..size {
            for b in 0..size {
                m[a * size + b] = if b >= a { moments[b - a].clone() } else { moments[a - b].conj() };
            }
        }
        let trace = moments[0].re.mul(&BigFloat::from_u64(size as u64, p), p, RM);
        Self { p, n: size, m, trace }
    }

    fn at(&self, i: usize, j: usize) -> &BC {
        &self.m[i * self.n + j]
    }

    /// Lower Cholesky factor, or `None` if a pivot is not positive.
    fn cholesky(&self) -> Option<Vec<BC>> {
        let (n, p) = (self.n, self.p);
        let mut l = vec![BC::zero(p); n * n];
        for j in 0..n {
            let mut d = self.at(j, j).re.clone();
            for k in 0..j {
                d = d.sub(&l[j * n + k].norm_sqr(p), p, RM);
            }
            if d.is_negative() || d.is_zero() {
                return None;
            }
            let djj = d.sqrt(p, RM);
            l[j * n + j] = BC { re: djj.clone(), im: BigFloat::from_f64(0.0, p) };
            for i in j + 1..n {
                let mut s = self.at(i, j).clone();
                for k in 0..j {
                    s = s.sub(&l[i * n + k].mul(&l[j * n + k].conj(), p), p);
                }
                l[i * n + j] = BC { re: s.re.div(&djj, p, RM), im: s.im.div(&djj, p, RM) };
            }
        }
        Some(l)
    }

    fn solve(&self, l: &[BC], b: &[BC]) -> Vec<BC> {
        let (n, p) = (self.n, self.p);
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i].clone();
            for k in 0..i {
                s = s.sub(&l[i * n + k].mul(&z[k], p), p);
            }
            let d = &l[i * n + i].re;
            z[i] = BC { re: s.re.div(d, p, RM), im: s.im.div(d, p, RM) };
        }
        for i in (0..n).rev() {
            let mut s = z[i].clone();
            for k in i + 1..n {
                s = s.sub(&l[k * n + i].conj().mul(&z[k], p), p);
            }
            let d = &l[i * n + i].re;
            z[i] = BC { re: s.re.div(d, p, RM), im: s.im.div(d, p, RM) };
        }
        z
    }

    fn rayleigh(&self, x: &[BC]) -> BigFloat {
        let (n, p) = (self.n, self.p);
        let mut num = BigFloat::from_f64(0.0, p);
        let mut den = BigFloat::from_f64(0.0, p);
        for i in 0..n {
            let mut mx = BC::zero(p);
            for j in 0..n {
                mx = mx.add(&self.at(i, j).mul(&x[j], p), p);
            }
            num = num.add(&x[i].conj().mul(&mx, p).re, p, RM);
            den = den.add(&x[i].norm_sqr(p), p, RM);
        }
        num.div(&den, p, RM)
    }

    fn min_eigenvalue(&self) -> Option<BigFloat> {
        let p = self.p;
        let l = self.cholesky()?;
        let mut x: Vec<BC> = (0..self.n)
            .map(|i| BC { re: BigFloat::from_f64(1.0 + 0.1 * i as f64, p), im: BigFloat::from_f64(0.05 * i as f64, p) })
            .collect();
        let mut last: Option<BigFloat> = None;
        let tol = BigFloat::from_f64(2f64.powi(-100), p);
        for _ in 0..60 {
            x = self.solve(&l, &x);
            let mut nrm = BigFloat::from_f64(0.0, p);
            for xi in &x {
                nrm = nrm.add(&xi.norm_sqr(p), p, RM);
            }
            let inv = BigFloat::from_f64(1.0, p).div(&nrm.sqrt(p, RM), p, RM);
            x = x.iter().map(|xi| xi.scale(&inv, p)).collect();
            let lam = self.rayleigh(&x);
            if let Some(prev) = &last {
                let rel = lam.sub(prev, p, RM).abs().div(&lam.abs(), p, RM);
                if rel.cmp(&tol).is_some_and(|c| c < 0) {
                    return Some(lam);
                }
            }
            last = Some(lam);
        }
        last
    }
}
