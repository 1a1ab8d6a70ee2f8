mod common;

use std::f64::consts::PI;

use common::*;
use kpi_core::dispersion::*;
use kpi_core::lp::{littlewood_paley_block, LPFamily};
use kpi_core::propagator::*;
use kpi_core::{Error, SpectralField, TorusGrid, Window};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn kp() -> DispersionParams {
    DispersionParams::full_2d(2.0).unwrap()
}

fn central_difference(f: impl Fn(f64) -> f64, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

#[test]
fn omega_examples_and_domain() {
    assert_eq!(omega(1, 0, &kp()).unwrap(), 1.0);
    assert_eq!(omega(2, 3, &kp()).unwrap(), 12.5);
    assert_eq!(omega(-1, 1, &kp()).unwrap(), -2.0);
    assert!(matches!(omega(0, 2, &kp()), Err(Error::Domain(_))));
}

#[test]
fn group_velocity_examples() {
    let p = DispersionParams::reduced(2.0, 1.0).unwrap();
    assert!((group_velocity(1.0, &p).unwrap() - 2.0).abs() < 1e-15);
    assert!(group_velocity(3f64.powf(-0.25), &p).unwrap().abs() <= 1e-12);
    let p1 = DispersionParams::reduced(1.0, 1.0).unwrap();
    assert!(group_velocity(2f64.powf(-1.0 / 3.0), &p1).unwrap().abs() <= 1e-12);
    assert!(matches!(group_velocity(0.0, &p), Err(Error::Domain(_))));
}

#[test]
fn critical_point_examples() {
    let cases = [(2.0, 1.0, 0.7598357), (2.0, 2.0, 1.0745700), (1.0, 1.0, 0.7937005)];
    for (alpha, lambda, expect) in cases {
        let p = DispersionParams::reduced(alpha, lambda).unwrap();
        let pts = critical_points(&p);
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].xi, -pts[1].xi);
        assert!((pts[1].xi - expect).abs() < 1e-7);
        assert!(group_velocity(pts[1].xi, &p).unwrap().abs() <= 1e-12);
        assert!(pts[1].phi_pp > 0.0);
    }
    assert!(critical_points(&DispersionParams::reduced(2.0, 0.0).unwrap()).is_empty());
}

/// Bisection on the sign change of the group velocity.
fn bisect_critical(p: &DispersionParams) -> f64 {
    let (mut a, mut b) = (1e-3, 100.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if group_velocity(m, p).unwrap() < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn critical_frequency_matches_bisection() {
    let mut r = rng(11);
    for _ in 0..50 {
        let p = DispersionParams::reduced(r.random_range(0.1..2.0), r.random_range(0.1..5.0)).unwrap();
        let xi0 = critical_frequency(&p).unwrap();
        assert!((xi0 - bisect_critical(&p)).abs() <= 1e-12 * xi0.max(1.0));
    }
}

#[test]
fn semiclassical_translation_examples() {
    let p = DispersionParams::reduced(2.0, 1.0).unwrap();
    let d = semiclassical_translation(0.1, &p).unwrap();
    assert_eq!(d.shift, 7);
    assert!((d.sigma_h - 0.0598357).abs() < 1e-7);
    assert!((d.r_h - 0.598357).abs() < 1e-6);
    assert_eq!(d.r_h, d.sigma_h / d.h);
    let closed = 12.0 / 3f64.powf(0.25);
    assert!((d.phi_pp_critical - closed).abs() < 1e-12);
    assert!((d.phi_pp_critical - 9.118028).abs() < 1e-6);
    // σ_h + h⌊ξ₀/h⌋ = ξ₀, so the translated second derivative is φ''(ξ₀).
    assert!((d.phi_pp_translated - d.phi_pp_critical).abs() < 1e-12);
    assert!(matches!(semiclassical_translation(1.0, &p), Err(Error::Parameter(_))));
    assert!(matches!(semiclassical_translation(0.0, &p), Err(Error::Parameter(_))));

    let p1 = DispersionParams::reduced(1.0, 1.0).unwrap();
    let d1 = semiclassical_translation(0.05, &p1).unwrap();
    let fd = {
        let s = 1e-5;
        let f = |x: f64| symbol(x, &p1).unwrap();
        (f(d1.xi0 + s) - 2.0 * f(d1.xi0) + f(d1.xi0 - s)) / (s * s)
    };
    assert!((d1.a0 - fd / 2.0).abs() <= 1e-6 * fd.abs().max(1.0));
}

#[test]
fn mu_pair_examples() {
    assert_eq!(mu_pair(0.0).unwrap(), (0.5, 0.5));
    let (a, b) = mu_pair(0.3).unwrap();
    assert!((a - 0.3).abs() < 1e-15 && a == b);
    let (a, _) = mu_pair(0.45).unwrap();
    assert!((a - 0.45).abs() < 1e-15);
    assert!(mu_pair(1.0).is_err() && mu_pair(-0.1).is_err());
}

#[test]
fn mu_pair_range_and_identity() {
    let mut r = rng(12);
    for _ in 0..10_000 {
        let x: f64 = r.random_range(0.0..1.0);
        let (m1, m2) = mu_pair(x).unwrap();
        assert!((0.125..=0.875).contains(&m1) && (0.125..=0.875).contains(&m2));
        let d = (m1 + m2 - 2.0 * x).rem_euclid(1.0);
        assert!(d.min(1.0 - d) <= 1e-12);
    }
}

#[test]
fn group_velocity_sign_split() {
    for (alpha, lambda) in [(2.0, 1.0), (0.5, 3.0), (1.0, 0.5)] {
        let p = DispersionParams::reduced(alpha, lambda).unwrap();
        let xi0 = critical_frequency(&p).unwrap();
        for i in 1..=50 {
            let below = xi0 * i as f64 / 51.0;
            let above = xi0 * (1.0 + i as f64 / 10.0);
            assert!(group_velocity(below, &p).unwrap() < 0.0);
            assert!(group_velocity(above, &p).unwrap() > 0.0);
        }
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let mut r = rng(13);
    for _ in 0..100 {
        let p = DispersionParams::reduced(r.random_range(0.2..2.0), r.random_range(0.0..2.0)).unwrap();
        let xi: f64 = r.random_range(0.1..10.0);
        let fd = central_difference(|x| symbol(x, &p).unwrap(), xi, 1e-5);
        let gv = group_velocity(xi, &p).unwrap();
        assert!((gv - fd).abs() <= 1e-6 * gv.abs().max(1.0), "xi = {xi}: {gv} vs {fd}");
        let fd2 = central_difference(|x| group_velocity(x, &p).unwrap(), xi, 1e-5);
        let pp = symbol_second_derivative(xi, &p).unwrap();
        assert!((pp - fd2).abs() <= 1e-6 * pp.abs().max(1.0));
    }
}

#[test]
fn evolve_examples() {
    let g = TorusGrid::two_d(16, 8).unwrap();
    let u = SpectralField::mode(g, 1, 1).unwrap();
    assert_eq!(evolve(&u, 0.0, &kp()).unwrap(), u);
    let v = evolve(&u, PI, &kp()).unwrap();
    assert!(v.max_abs_diff(&u).unwrap() <= 1e-13);

    let mut bad = u.clone();
    bad.set(0, -3, Complex64::new(1e-3, 0.0)).unwrap();
    assert!(matches!(evolve(&bad, 1.0, &kp()), Err(Error::MeanZero { l: -3, .. })));
    let reduced = DispersionParams::reduced(2.0, 1.0).unwrap();
    assert!(matches!(evolve(&u, 1.0, &reduced), Err(Error::Dimension(_))));
}

#[test]
fn evolve_matches_rk4_on_low_modes() {
    let g = TorusGrid::two_d(1024, 64).unwrap();
    let mut r = rng(14);
    for _ in 0..3 {
        let u = SpectralField::random_unit(g, Window::new(4, 4), &mut r).unwrap();
        let exact = evolve(&u, 0.7, &kp()).unwrap();
        let rk = rk4_reference_evolve(&u, 0.7, 10_000, &kp()).unwrap();
        assert!(exact.max_abs_diff(&rk).unwrap() <= 1e-8);
    }
}

#[test]
fn rk4_converges_at_fourth_order() {
    let g = TorusGrid::two_d(32, 8).unwrap();
    let u = SpectralField::random_unit(g, Window::new(3, 2), &mut rng(15)).unwrap();
    let exact = evolve(&u, 0.7, &kp()).unwrap();
    let e1 = exact.max_abs_diff(&rk4_reference_evolve(&u, 0.7, 200, &kp()).unwrap()).unwrap();
    let e2 = exact.max_abs_diff(&rk4_reference_evolve(&u, 0.7, 400, &kp()).unwrap()).unwrap();
    let ratio = e1 / e2;
    assert!((13.0..19.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn unitarity_group_law_and_reversal() {
    let mut r = rng(16);
    for g in [TorusGrid::one_d(256).unwrap(), TorusGrid::two_d(128, 32).unwrap()] {
        let p = if g.ny() == 1 { DispersionParams::reduced(1.5, 3.0).unwrap() } else { kp() };
        for _ in 0..10 {
            let u = random_mean_zero(g, &mut r);
            let n0 = u.norm();
            for t in [0.1, 1.0, 10.0] {
                let v = evolve(&u, t, &p).unwrap();
                assert!((v.norm() - n0).abs() <= 1e-12 * n0);
            }
            // Dyadic times, so that t + s is exact.
            let a = evolve(&evolve(&u, 0.25, &p).unwrap(), 0.875, &p).unwrap();
            let b = evolve(&u, 1.125, &p).unwrap();
            assert!(a.max_abs_diff(&b).unwrap() <= 1e-12);
            let back = evolve(&evolve(&u, 2.5, &p).unwrap(), -2.5, &p).unwrap();
            assert!(back.max_abs_diff(&u).unwrap() <= 1e-12);
        }
    }
}

#[test]
fn nyquist_is_zeroed() {
    let g = TorusGrid::two_d(16, 8).unwrap();
    let mut u = SpectralField::mode(g, 1, 1).unwrap();
    u.set(-8, 1, Complex64::new(1.0, 0.0)).unwrap();
    u.set(2, -4, Complex64::new(1.0, 0.0)).unwrap();
    let v = evolve(&u, 0.5, &kp()).unwrap();
    assert_eq!(v.get(-8, 1), Complex64::new(0.0, 0.0));
    assert_eq!(v.get(2, -4), Complex64::new(0.0, 0.0));
}

#[test]
fn mode_reduction_examples() {
    let g = TorusGrid::two_d(64, 16).unwrap();
    let u = SpectralField::mode(g, 1, 2).unwrap();
    let v = evolve_modes(&u, 1.0, 2.0).unwrap();
    assert!((v.get(1, 2) - Complex64::from_polar(1.0, 5.0)).norm() <= 1e-15);

    let flat = SpectralField::mode(g, 3, 0).unwrap();
    let w = evolve_modes(&flat, 0.4, 1.5).unwrap();
    let airy = 3f64.powf(1.5) * 3.0;
    assert!((w.get(3, 0) - Complex64::from_polar(1.0, 0.4 * airy)).norm() <= 1e-14);
}

#[test]
fn mode_reduction_matches_full_evolution() {
    let g = TorusGrid::two_d(128, 32).unwrap();
    let mut r = rng(17);
    for _ in 0..20 {
        let alpha = r.random_range(0.3..2.0);
        let t = r.random_range(-3.0..3.0);
        let u = random_mean_zero(g, &mut r);
        let p = DispersionParams::full_2d(alpha).unwrap();
        let a = evolve(&u, t, &p).unwrap();
        let b = evolve_modes(&u, t, alpha).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-13);
    }
}

fn shift_modes(u: &SpectralField, s: i64) -> SpectralField {
    let mut out = SpectralField::zeros(*u.grid());
    for (k, _, c) in u.iter_modes() {
        if c != Complex64::new(0.0, 0.0) {
            out.set(k + s, 0, c).unwrap();
        }
    }
    out
}

#[test]
fn semiclassical_evolution_is_translated_physical_evolution() {
    let (alpha, h, t) = (2.0, 0.1, 1e-3);
    let sc = DispersionParams::reduced(alpha, 1.0).unwrap();
    let physical = DispersionParams::reduced(alpha, DispersionParams::semiclassical_lambda(alpha, h)).unwrap();
    let xi0 = critical_frequency(&sc).unwrap();
    let s = (xi0 / h).floor() as i64;
    let g = TorusGrid::one_d(64).unwrap();
    let mut w = SpectralField::zeros(g);
    let mut r = rng(18);
    for k in -12..=12 {
        if k != -s {
            w.set(k, 0, Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).unwrap();
        }
    }
    let a = evolve_semiclassical(&w, t, h, &sc).unwrap();
    let gauge = phase_factor(-t, symbol(xi0, &sc).unwrap() / h.powf(1.0 + alpha));
    let b = shift_modes(&evolve(&shift_modes(&w, s), t, &physical).unwrap(), -s).scaled(gauge);
    assert!(a.max_abs_diff(&b).unwrap() <= 1e-12);

    assert_eq!(evolve_semiclassical(&w, 0.0, h, &sc).unwrap(), w);
    let mut singular = w.clone();
    singular.set(-s, 0, Complex64::new(1.0, 0.0)).unwrap();
    assert!(matches!(evolve_semiclassical(&singular, t, h, &sc), Err(Error::MeanZero { .. })));
}

#[test]
fn semiclassical_critical_mode_is_stationary() {
    // Choose h so that ξ₀/h is an integer: the translated critical point
    // sits on the grid at k = 0 and the gauge removes its phase.
    let sc = DispersionParams::reduced(2.0, 1.0).unwrap();
    let xi0 = critical_frequency(&sc).unwrap();
    let h = xi0 / 9.0;
    let g = TorusGrid::one_d(32).unwrap();
    let w = SpectralField::mode(g, 0, 0).unwrap();
    for t in [0.1, 1.0, 5.0] {
        let v = evolve_semiclassical(&w, t, h, &sc).unwrap();
        assert!((v.get(0, 0) - 1.0).norm() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn omega_is_odd(k in 1i64..500, l in -200i64..200, alpha in 0.1..2.0f64) {
        let p = DispersionParams::full_2d(alpha).unwrap();
        prop_assert_eq!(omega(-k, l, &p).unwrap(), -omega(k, l, &p).unwrap());
        prop_assert_eq!(omega(-k, -l, &p).unwrap(), -omega(k, l, &p).unwrap());
    }

    #[test]
    fn evolution_commutes_with_lp_blocks(seed in any::<u64>(), n in -2i32..6, t in -5.0..5.0f64) {
        let g = TorusGrid::two_d(64, 8).unwrap();
        let u = random_mean_zero(g, &mut rng(seed));
        let fam = LPFamily::new();
        let h = 1.0 / 16.0;
        let a = evolve(&littlewood_paley_block(&u, n, h, &fam).unwrap(), t, &kp()).unwrap();
        let b = littlewood_paley_block(&evolve(&u, t, &kp()).unwrap(), n, h, &fam).unwrap();
        // Both are diagonal; only the order of two roundings differs.
        prop_assert!(a.max_abs_diff(&b).unwrap() <= 1e-15);
    }

    #[test]
    fn norm_is_conserved(seed in any::<u64>(), t in -20.0..20.0f64, alpha in 0.2..2.0f64) {
        let g = TorusGrid::two_d(32, 16).unwrap();
        let u = random_mean_zero(g, &mut rng(seed));
        let v = evolve(&u, t, &DispersionParams::full_2d(alpha).unwrap()).unwrap();
        prop_assert!((v.norm() - u.norm()).abs() <= 1e-12 * u.norm());
    }
}
