mod common;

use common::*;
use kpi_core::control::{ControlOperator, ControlProfile};
use kpi_core::dispersion::DispersionParams;
use kpi_core::gramian::{Direction, QuadratureApplicator};
use kpi_core::hum::*;
use kpi_core::propagator::evolve;
use kpi_core::quadrature::TimeQuadrature;
use kpi_core::transform::FourierPlan;
use kpi_core::{Error, SpectralField, TorusGrid, Window};
use num_complex::Complex64;

fn kp() -> DispersionParams {
    DispersionParams::full_2d(2.0).unwrap()
}

fn vertical(nx: usize) -> ControlOperator {
    ControlOperator::vertical(ControlProfile::default_for(TorusGrid::one_d(nx).unwrap()).unwrap())
}

fn two_mode_datum(grid: TorusGrid) -> SpectralField {
    let mut u = SpectralField::zeros(grid);
    u.set(1, 1, Complex64::new(1.0, 0.0)).unwrap();
    u.set(2, -1, Complex64::new(1.0, 0.0)).unwrap();
    u.scaled(Complex64::new(1.0 / u.norm(), 0.0))
}

#[test]
fn gramian_action_is_hermitian_and_nonnegative() {
    let grid = TorusGrid::two_d(64, 16).unwrap();
    let window = Window::new(16, 4);
    let hum = HumOperator::new(vertical(64), kp(), window, grid, 1.0).unwrap();
    let mut r = rng(31);
    for _ in 0..100 {
        let v = SpectralField::random_unit(grid, window, &mut r).unwrap();
        let w = SpectralField::random_unit(grid, window, &mut r).unwrap();
        let lv = hum.apply(&v).unwrap();
        assert!(lv.inner(&v).unwrap().re >= 0.0);
        let lhs = lv.inner(&w).unwrap();
        let rhs = v.inner(&hum.apply(&w).unwrap()).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * v.norm() * w.norm());
    }
    let direct = hum_gramian_apply(&two_mode_datum(grid), 1.0, &vertical(64), &kp(), window).unwrap();
    assert_eq!(direct, hum.apply(&two_mode_datum(grid)).unwrap());
}

#[test]
fn flat_sector_is_invisible_to_horizontal_gramian() {
    let grid = TorusGrid::two_d(32, 16).unwrap();
    let op = ControlOperator::horizontal(ControlProfile::default_for(TorusGrid::one_d(16).unwrap()).unwrap());
    let window = Window::new(8, 4);
    let mut v = SpectralField::zeros(grid);
    v.set(1, 0, Complex64::new(0.5, 0.2)).unwrap();
    v.set(-3, 0, Complex64::new(-1.0, 0.0)).unwrap();
    let out = hum_gramian_apply(&v, 1.0, &op, &kp(), window).unwrap();
    assert!(out.norm() <= 1e-14);
}

#[test]
fn dense_action_matches_128_node_quadrature() {
    let grid = TorusGrid::two_d(16, 8).unwrap();
    let window = Window::new(4, 2);
    let op = vertical(16);
    let hum = HumOperator::new(op.clone(), kp(), window, grid, 1.0).unwrap();
    let applicator = QuadratureApplicator::new(op, kp(), window, grid, 1.0, Direction::Hum)
        .unwrap()
        .with_quadrature(TimeQuadrature::with_nodes(1.0, 128).unwrap());
    let mut r = rng(32);
    for _ in 0..10 {
        let v = SpectralField::random_unit(grid, window, &mut r).unwrap();
        let a = hum.apply(&v).unwrap();
        let b = applicator.apply(&v).unwrap();
        assert!(a.sub(&b).unwrap().norm() <= 1e-10 * b.norm());
    }
}

#[test]
fn free_evolution_needs_no_control() {
    let grid = TorusGrid::two_d(64, 16).unwrap();
    let window = Window::new(16, 4);
    let u0 = SpectralField::random_unit(grid, window, &mut rng(33)).unwrap();
    let u1 = evolve(&u0, 1.0, &kp()).unwrap();
    let traj = synthesize_control(&u0, &u1, 1.0, &vertical(64), &kp(), window, &CgOptions::default()).unwrap();
    assert_eq!(traj.diagnostics.iterations, 0);
    assert_eq!(traj.diagnostics.total_iterations, 0);
    assert_eq!(traj.adjoint_final.coeff_norm_sqr(), 0.0);
    assert!(traj.samples.iter().all(|f| f.coeff_norm_sqr() == 0.0));
    let end = verify_control(&u0, &traj, &kp(), 10_000).unwrap();
    assert!(end.sub(&u1).unwrap().norm() <= 1e-8);
}

#[test]
fn steering_two_modes_to_rest() {
    let grid = TorusGrid::two_d(64, 16).unwrap();
    let window = Window::new(16, 4);
    let u0 = two_mode_datum(grid);
    let zero = SpectralField::zeros(grid);
    let opts = CgOptions { tol: 1e-10, max_iter: 500 };
    let traj = synthesize_control(&u0, &zero, 1.0, &vertical(64), &kp(), window, &opts).unwrap();
    let d = &traj.diagnostics;
    assert!(d.final_residual <= 1e-8, "{d:?}");
    assert!(d.iterations <= 500);
    // Only the two active transverse frequencies need work.
    assert_eq!(d.blocks.iter().filter(|b| b.iterations > 0).count(), 2);
    let end = verify_control(&u0, &traj, &kp(), 10_000).unwrap();
    assert!(end.norm() <= 1e-6 * u0.norm(), "{:e}", end.norm());
}

#[test]
fn cg_residuals_never_increase() {
    let grid = TorusGrid::two_d(64, 16).unwrap();
    let window = Window::new(16, 4);
    let mut r = rng(34);
    let u0 = SpectralField::random_unit(grid, window, &mut r).unwrap();
    let u1 = SpectralField::random_unit(grid, window, &mut r).unwrap();
    let traj = synthesize_control(&u0, &u1, 1.0, &vertical(64), &kp(), window, &CgOptions::default()).unwrap();
    for b in &traj.diagnostics.blocks {
        for w in b.history.windows(2) {
            assert!(w[1] <= w[0], "block {}: {:?}", b.fixed, b.history);
        }
    }
}

#[test]
fn samples_follow_the_rule_and_are_mean_free() {
    let grid = TorusGrid::two_d(32, 8).unwrap();
    let window = Window::new(8, 2);
    let u0 = SpectralField::random_unit(grid, window, &mut rng(35)).unwrap();
    let mut traj =
        synthesize_control(&u0, &SpectralField::zeros(grid), 1.0, &vertical(32), &kp(), window, &CgOptions::default()).unwrap();
    assert_eq!(traj.nodes.len(), DEFAULT_EXPORT_NODES);
    assert_eq!(traj.nodes[0], 0.0);
    assert_eq!(*traj.nodes.last().unwrap(), 1.0);
    traj.resample(17).unwrap();
    for (t, f) in traj.nodes.iter().zip(&traj.samples) {
        let rule = traj.control_at(*t).unwrap();
        assert!(f.max_abs_diff(&rule).unwrap() <= 1e-13);
        for l in -3..=3 {
            assert!(f.get(0, l).norm() <= 1e-14 * f.norm().max(1.0));
        }
    }
    assert!(traj.resample(1).is_err());
}

#[test]
fn horizontal_control_cannot_reach_flat_modes() {
    let grid = TorusGrid::two_d(32, 16).unwrap();
    let op = ControlOperator::horizontal(ControlProfile::default_for(TorusGrid::one_d(16).unwrap()).unwrap());
    let u0 = SpectralField::mode(grid, 1, 0).unwrap();
    let res = synthesize_control(&u0, &SpectralField::zeros(grid), 1.0, &op, &kp(), Window::new(8, 4), &CgOptions::default());
    match res {
        Err(Error::NonConvergence { history, .. }) => assert!(!history.is_empty()),
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn input_validation() {
    let grid = TorusGrid::two_d(32, 8).unwrap();
    let window = Window::new(4, 2);
    let u0 = SpectralField::mode(grid, 10, 0).unwrap();
    let zero = SpectralField::zeros(grid);
    let op = vertical(32);
    let opts = CgOptions::default();
    assert!(matches!(synthesize_control(&u0, &zero, 1.0, &op, &kp(), window, &opts), Err(Error::Truncation(_))));
    let inside = SpectralField::mode(grid, 1, 0).unwrap();
    assert!(matches!(synthesize_control(&inside, &zero, 0.0, &op, &kp(), window, &opts), Err(Error::Parameter(_))));
    let other = SpectralField::zeros(TorusGrid::two_d(32, 16).unwrap());
    assert!(synthesize_control(&inside, &other, 1.0, &op, &kp(), window, &opts).is_err());
    let traj = synthesize_control(&inside, &zero, 1.0, &op, &kp(), window, &opts).unwrap();
    assert!(matches!(verify_control(&inside, &traj, &kp(), 99), Err(Error::Parameter(_))));
}

#[test]
fn control_map_is_linear() {
    let grid = TorusGrid::two_d(32, 8).unwrap();
    let window = Window::new(8, 2);
    let op = vertical(32);
    let opts = CgOptions { tol: 1e-12, max_iter: 500 };
    let mut r = rng(36);
    let f: Vec<SpectralField> = (0..4).map(|_| SpectralField::random_unit(grid, window, &mut r).unwrap()).collect();
    let a = synthesize_control(&f[0], &f[1], 1.0, &op, &kp(), window, &opts).unwrap();
    let b = synthesize_control(&f[2], &f[3], 1.0, &op, &kp(), window, &opts).unwrap();
    let c = synthesize_control(&f[0].add(&f[2]).unwrap(), &f[1].add(&f[3]).unwrap(), 1.0, &op, &kp(), window, &opts).unwrap();
    let sum = a.adjoint_final.add(&b.adjoint_final).unwrap();
    assert!(sum.sub(&c.adjoint_final).unwrap().norm() <= 1e-8 * c.adjoint_final.norm());
    for t in [0.0, 0.4, 1.0] {
        let lhs = a.control_at(t).unwrap().add(&b.control_at(t).unwrap()).unwrap();
        let rhs = c.control_at(t).unwrap();
        assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-8 * rhs.norm());
    }
}

/// Terminal effect `∫₀^T S(T−s) P G h(s) ds` of a control given on the
/// quadrature nodes.
fn terminal_effect(
    h: &[SpectralField],
    q: &TimeQuadrature,
    op: &ControlOperator,
    window: Window,
) -> SpectralField {
    let mut acc = SpectralField::zeros(*h[0].grid());
    for ((hs, &s), &w) in h.iter().zip(&q.nodes).zip(&q.weights) {
        let pushed = evolve(&op.apply(hs).unwrap().restrict(window), q.horizon - s, &kp()).unwrap();
        acc.axpy(Complex64::new(w, 0.0), &pushed).unwrap();
    }
    acc
}

fn energy(f: &[SpectralField], q: &TimeQuadrature) -> f64 {
    f.iter().zip(&q.weights).map(|(x, w)| w * x.norm_sqr()).sum()
}

#[test]
fn hum_control_has_least_energy() {
    let grid = TorusGrid::two_d(32, 8).unwrap();
    let window = Window::new(6, 2);
    let op = vertical(32);
    let opts = CgOptions { tol: 1e-13, max_iter: 500 };
    let mut r = rng(37);
    let u0 = SpectralField::random_unit(grid, window, &mut r).unwrap();
    let zero = SpectralField::zeros(grid);
    let traj = synthesize_control(&u0, &zero, 1.0, &op, &kp(), window, &opts).unwrap();
    let q = TimeQuadrature::with_nodes(1.0, 1024).unwrap();
    let f: Vec<SpectralField> = q.nodes.iter().map(|&t| traj.control_at(t).unwrap()).collect();
    let base = energy(&f, &q);
    assert!((base - traj.energy(1024).unwrap()).abs() <= 1e-12 * base);

    let hum = HumOperator::new(op.clone(), kp(), window, grid, 1.0).unwrap();
    for trial in 0..5 {
        // A control outside the HUM range, time-modulated, then corrected
        // so that its terminal effect vanishes.
        let mut delta = SpectralField::random_unit(grid, window, &mut r).unwrap();
        let lam_norm = hum.apply(&delta).unwrap().inner(&delta).unwrap().re.sqrt();
        delta.scale(Complex64::new(1e-3 / lam_norm, 0.0));
        let freq = 1.0 + trial as f64;
        let raw: Vec<SpectralField> = q
            .nodes
            .iter()
            .map(|&t| {
                let v = evolve(&delta, t - 1.0, &kp()).unwrap();
                op.apply(&v).unwrap().scaled(Complex64::new((std::f64::consts::PI * freq * t).cos(), 0.0))
            })
            .collect();
        let effect = terminal_effect(&raw, &q, &op, window);
        let fix = synthesize_control(&zero, &effect, 1.0, &op, &kp(), window, &opts).unwrap();
        let h: Vec<SpectralField> = raw
            .iter()
            .zip(&q.nodes)
            .map(|(x, &t)| x.sub(&fix.control_at(t).unwrap()).unwrap())
            .collect();
        assert!(terminal_effect(&h, &q, &op, window).norm() <= 1e-9 * effect.norm().max(1e-3));
        let perturbed: Vec<SpectralField> = f.iter().zip(&h).map(|(a, b)| a.add(b).unwrap()).collect();
        let e = energy(&perturbed, &q);
        let gap = energy(&h, &q);
        assert!(e > base, "trial {trial}: {e} <= {base}");
        // First-order optimality: the cross term vanishes.
        assert!(((e - base) - gap).abs() <= 1e-6 * gap, "trial {trial}");
    }
}

#[test]
fn verification_converges_at_fourth_order() {
    let grid = TorusGrid::two_d(32, 8).unwrap();
    let window = Window::new(6, 2);
    let u0 = SpectralField::random_unit(grid, window, &mut rng(38)).unwrap();
    let traj = synthesize_control(
        &u0,
        &SpectralField::zeros(grid),
        1.0,
        &vertical(32),
        &kp(),
        window,
        &CgOptions { tol: 1e-12, max_iter: 500 },
    )
    .unwrap();
    let reference = verify_control(&u0, &traj, &kp(), 8000).unwrap();
    let e1 = verify_control(&u0, &traj, &kp(), 200).unwrap().sub(&reference).unwrap().norm();
    let e2 = verify_control(&u0, &traj, &kp(), 400).unwrap().sub(&reference).unwrap().norm();
    let ratio = e1 / e2;
    assert!((13.0..19.0).contains(&ratio), "ratio {ratio}: {e1:e} {e2:e}");
    assert!(reference.norm() <= 1e-9);
}

#[test]
fn physical_samples_match_spectral_samples() {
    let grid = TorusGrid::two_d(32, 8).unwrap();
    let window = Window::new(6, 2);
    let u0 = SpectralField::random_unit(grid, window, &mut rng(39)).unwrap();
    let traj =
        synthesize_control(&u0, &SpectralField::zeros(grid), 1.0, &vertical(32), &kp(), window, &CgOptions::default()).unwrap();
    let plan = FourierPlan::new(grid);
    let phys = traj.control_samples_at(&plan, 0.3).unwrap();
    let spec = plan.inverse(&traj.control_at(0.3).unwrap()).unwrap();
    let err = phys.iter().zip(&spec).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err <= 1e-12);
}
