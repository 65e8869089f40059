use std::f64::consts::LN_2;

use sce::classical_dynamics::*;
use sce::example_model::{analytic_tangent, analytic_trajectory, ExampleParams};
use sce::linalg::{blocks, M4};
use sce::propagator::*;
use sce::{Error, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn p() -> ExampleParams {
    ExampleParams::default()
}

fn label_sets() -> Vec<Labels> {
    vec![
        Labels { zb: c(1.0, 0.0), sb: c(1.0, 0.0), zk: c(1.0, 0.0), sk: c(1.0, 0.0) },
        Labels { zb: c(1.1, 0.1), sb: c(0.9, -0.1), zk: c(1.0, 0.0), sk: c(1.0, 0.0) },
        Labels { zb: c(0.8, 0.2), sb: c(1.2, 0.3), zk: c(1.0, -0.1), sk: c(0.9, 0.0) },
    ]
}

fn seed(l: &Labels, dir: Direction) -> [C64; 2] {
    match dir {
        Direction::Forward => [l.zb.conj(), l.sb.conj()],
        Direction::Backward => [l.zk, l.sk],
    }
}

fn swapped(l: &Labels) -> Labels {
    Labels { zb: l.zk, sb: l.sk, zk: l.zb, sk: l.sb }
}

const DIRS: [Direction; 2] = [Direction::Forward, Direction::Backward];

/// Relative agreement of the semiclassical and exact propagators at
/// `T = 0.05 T_p`; measured values stay below 2.6e-3.
const SC_REL_TOL: f64 = 1e-2;

#[test]
fn zero_time_action_is_boundary_only() {
    let model = p().model();
    let x = PhaseState::real(c(1.0, 0.0), c(1.0, 0.0));
    let tr = integrate(&x, 0.0, &model, 1).unwrap();
    let e = action_exponent(&tr, &model).unwrap();
    assert!((e - c(1.0 + 10.0 * LN_2, 0.0)).norm() < 1e-14);
    let lam = normalization_lambda(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), 5.0);
    assert!((e - lam).exp().norm() - 1.0 < 1e-14);
    assert_eq!(correction_exponent(&tr, &model).unwrap(), c(0.0, 0.0));
}

#[test]
fn lambda_cases() {
    let z = c(0.0, 0.0);
    assert_eq!(normalization_lambda(z, z, z, z, 3.0), 0.0);
    let one = c(1.0, 0.0);
    assert!((normalization_lambda(one, one, one, one, 5.0) - 7.93147180559945).abs() < 1e-12);
    let (a, b, s, t) = (c(0.3, 1.0), c(-0.2, 0.5), c(2.0, 0.1), c(0.4, -0.4));
    assert_eq!(normalization_lambda(a, b, s, t, 2.5), normalization_lambda(b, a, t, s, 2.5));
    assert!(normalization_lambda(a, b, s, t, 2.5) >= 0.0);
}

#[test]
fn real_trajectory_phase_has_unit_modulus_part() {
    // on the real slice H is real, so the -iH/hbar part of the integrand is imaginary
    let pp = p();
    let model = pp.model();
    let x = PhaseState::real(c(1.0, 0.0), c(1.0, 0.0));
    let tr = integrate(&x, pp.time(0.2), &model, 2048).unwrap();
    let h = model.value(&x);
    assert!(h.im.abs() < 1e-15);
    let hterm = -C64::i() * h * tr.duration();
    assert!(hterm.re.abs() < 1e-15);
}

#[test]
fn correction_is_constant_rate_for_the_example() {
    let pp = p();
    let model = pp.model();
    let x = PhaseState::new(c(0.8, 0.3), c(0.6, -0.4), c(1.1, -0.2), c(0.9, 0.5));
    let t = 0.7;
    let g1 = correction_exponent(&integrate(&x, t, &model, 512).unwrap(), &model).unwrap();
    let g2 = correction_exponent(&integrate(&x, t, &model, 1024).unwrap(), &model).unwrap();
    assert!((g1 - g2).norm() < 1e-10);
    // integrand evaluated at the start times T
    let jac = eom_jacobian(&x, &model);
    let rate = 0.5 * (C64::i() * model.hess_mixed(&x) + 0.5 * (jac[3][3] - jac[1][1]));
    assert!((g2 - rate * t).norm() < 1e-10);
    let back = integrate(&x, t, &model, 1024).map(|mut tr| {
        tr.direction = Direction::Backward;
        tr
    });
    assert!((correction_exponent(&back.unwrap(), &model).unwrap() + g2).norm() < 1e-14);
}

#[test]
fn action_is_additive_up_to_the_joint_boundary() {
    let pp = p();
    let model = pp.model();
    let x = PhaseState::new(c(0.8, 0.3), c(0.6, -0.4), c(1.1, -0.2), c(0.9, 0.5));
    let a = integrate(&x, 0.6, &model, 1200).unwrap();
    let b = integrate(a.last(), 0.4, &model, 800).unwrap();
    let whole = integrate(&x, 1.0, &model, 2000).unwrap();
    let mid = a.last();
    let joint = mid.ua * mid.va + 2.0 * pp.j * mid.chart().ln();
    let s = action_exponent(&a, &model).unwrap() + action_exponent(&b, &model).unwrap()
        - action_exponent(&whole, &model).unwrap();
    assert!((s - joint).norm() < 1e-9);
}

#[test]
fn prefactor_at_zero_and_under_time_reversal() {
    let pp = p();
    let x = PhaseState::new(c(0.8, 0.3), c(0.6, -0.4), c(1.1, -0.2), c(0.9, 0.5));
    for dir in DIRS {
        assert_eq!(prefactor_d(&M4::identity(), &x, &x, dir, None).unwrap(), c(1.0, 0.0));
    }
    // backward block of the reversed flow is the inverse of the forward one
    let t = 0.8;
    let end = analytic_trajectory(&x, t, &pp).unwrap();
    let m = analytic_tangent(&x, t, &pp).unwrap();
    let minv = analytic_tangent(&end, -t, &pp).unwrap();
    assert!((minv * m - M4::identity()).iter().all(|e| e.norm() < 1e-12));
    let (_, _, _, vv) = blocks(&m);
    let (uu, _, _, _) = blocks(&minv);
    let df = prefactor_d(&m, &x, &end, Direction::Forward, None).unwrap();
    let db = prefactor_d(&minv, &end, &x, Direction::Backward, None).unwrap();
    let check_f = (end.chart() / x.chart() / vv.determinant()).sqrt();
    let check_b = (x.chart() / end.chart() / uu.determinant()).sqrt();
    assert!((df - check_f).norm() < 1e-13 && (db - check_b).norm() < 1e-13);
}

#[test]
fn prefactor_reports_caustics() {
    let x = PhaseState::real(c(1.0, 0.0), c(1.0, 0.0));
    let mut m = M4::identity();
    m[(2, 2)] = c(0.0, 0.0);
    assert!(matches!(prefactor_d(&m, &x, &x, Direction::Forward, None), Err(Error::Caustic { .. })));
}

#[test]
fn prefactor_branch_is_continuous() {
    let pp = p();
    let x = PhaseState::real(c(1.0, 0.0), c(1.0, 0.0));
    let mut hint: Option<C64> = None;
    for k in 1..=500 {
        let t = pp.time(k as f64 * 1e-3);
        let end = analytic_trajectory(&x, t, &pp).unwrap();
        let m = analytic_tangent(&x, t, &pp).unwrap();
        let d = prefactor_d(&m, &x, &end, Direction::Forward, hint).unwrap();
        if let Some(h) = hint {
            let jump = (d / h).arg().abs();
            assert!(jump < 0.5, "arg D jumps by {jump} at step {k}");
        }
        hint = Some(d);
    }
}

#[test]
fn propagators_reduce_to_overlaps_at_zero_time() {
    let pp = p();
    let model = pp.model();
    for l in label_sets() {
        let ov = overlap_product(&l, pp.j).unwrap();
        for dir in DIRS {
            let ks = k_semiclassical(&l, 0.0, &model, &[seed(&l, dir)], dir, &ShootOptions::default()).unwrap();
            assert!((ks - ov).norm() < 1e-10);
            let kq = k_quantum_example(&l, 0.0, &pp, 60, dir).unwrap();
            assert!((kq - ov).norm() < 1e-12);
        }
    }
    let same = label_sets()[0];
    assert!((k_quantum_example(&same, 0.0, &pp, 60, Direction::Forward).unwrap() - 1.0).norm() < 1e-14);
}

#[test]
fn exact_propagator_revives_and_is_hermitian() {
    let pp = p();
    let revival = pp.j * 2.0 * std::f64::consts::PI / pp.lambda;
    for l in label_sets() {
        for dir in DIRS {
            let k0 = k_quantum_example(&l, 0.0, &pp, 60, dir).unwrap();
            let kr = k_quantum_example(&l, revival, &pp, 60, dir).unwrap();
            assert!((k0 - kr).norm() < 1e-12);
        }
        let t = 1.7;
        let kp = k_quantum_example(&swapped(&l), t, &pp, 60, Direction::Forward).unwrap();
        let km = k_quantum_example(&l, t, &pp, 60, Direction::Backward).unwrap();
        assert!((km - kp.conj()).norm() < 1e-14);
    }
}

#[test]
fn semiclassical_propagator_tracks_exact_at_short_times() {
    let pp = p();
    let model = pp.model();
    let t = pp.time(0.05);
    for l in label_sets() {
        for dir in DIRS {
            let ks = k_semiclassical(&l, t, &model, &[seed(&l, dir)], dir, &ShootOptions::default()).unwrap();
            let kq = k_quantum_example(&l, t, &pp, 60, dir).unwrap();
            assert!((ks - kq).norm() / kq.norm() < SC_REL_TOL);
        }
        let kp = k_semiclassical(&swapped(&l), t, &model, &[seed(&swapped(&l), Direction::Forward)], Direction::Forward, &ShootOptions::default())
            .unwrap();
        let km = k_semiclassical(&l, t, &model, &[seed(&l, Direction::Backward)], Direction::Backward, &ShootOptions::default()).unwrap();
        assert!((km.norm() - kp.norm()).abs() / kp.norm() < SC_REL_TOL);
    }
}

#[test]
fn semiclassical_terms_deduplicate_and_report_failures() {
    let pp = p();
    let model = pp.model();
    let l = label_sets()[1];
    let t = pp.time(0.02);
    let good = seed(&l, Direction::Forward);
    let near = [good[0] * 1.001, good[1] * 0.999];
    let opts = ShootOptions::default();
    let (terms, errors) = k_semiclassical_terms(&l, t, &model, &[good, near], Direction::Forward, &opts);
    assert_eq!(terms.len(), 1);
    assert!(errors.is_empty());
    let singular = [c(0.0, 0.0), -1.0 / l.sk];
    let (terms, errors) = k_semiclassical_terms(&l, t, &model, &[singular], Direction::Forward, &opts);
    assert!(terms.is_empty() && errors.len() == 1);
    assert_eq!(k_semiclassical(&l, t, &model, &[singular], Direction::Forward, &opts).unwrap_err(), Error::EmptySum);
}

#[test]
fn hessian_identities_on_the_real_trajectory() {
    let pp = p();
    let model = pp.model();
    let l = label_sets()[0];
    let t = pp.time(0.05);
    let opts = ShootOptions::default();
    for dir in DIRS {
        let rep = hessian_identity_check(&l, dir, &model, t, seed(&l, dir), &opts, 1e-3).unwrap();
        assert!(rep.max() < 1e-6, "{rep:?}");
        assert!(rep.roundtrip < 1e-8);
        // the determinant form of the prefactor agrees with the tangent-matrix form
        let b = l.boundary(dir);
        let tr = shoot(&b, dir, &model, t, seed(&l, dir), &opts).unwrap();
        let s = action_hessians_fd(&b, dir, &model, t, seed(&l, dir), &opts, 1e-3).unwrap();
        let d = prefactor_d(&tr.m, tr.initial(), tr.last(), dir, None).unwrap();
        let dh = prefactor_from_hessians(&s, tr.initial(), tr.last(), dir, pp.j, pp.hbar);
        assert!((d - dh).norm() < 1e-6);
    }
}

#[test]
fn hessian_map_at_identity() {
    let pp = p();
    let x = PhaseState::new(c(0.8, 0.3), c(0.6, -0.4), c(1.1, -0.2), c(0.9, 0.5));
    let s = s_from_m(&M4::identity(), &x, &x, Direction::Forward, pp.j, pp.hbar).unwrap();
    let c2 = x.chart() * x.chart();
    let b = [-C64::i() * pp.hbar, -2.0 * C64::i() * pp.j * pp.hbar / c2];
    assert!((s.uv[(0, 0)] - b[0]).norm() < 1e-15 && (s.uv[(1, 1)] - b[1]).norm() < 1e-15);
    assert!(s.uv[(0, 1)].norm() < 1e-15 && s.uv[(1, 0)].norm() < 1e-15);
}

#[test]
fn hessian_maps_are_inverse() {
    let pp = p();
    let x = PhaseState::new(c(0.8, 0.3), c(0.6, -0.4), c(1.1, -0.2), c(0.9, 0.5));
    let t = 0.9;
    let end = analytic_trajectory(&x, t, &pp).unwrap();
    let m = analytic_tangent(&x, t, &pp).unwrap();
    for dir in DIRS {
        let s = s_from_m(&m, &x, &end, dir, pp.j, pp.hbar).unwrap();
        let back = m_from_s(&s, &x, &end, dir, pp.j, pp.hbar).unwrap();
        assert!((back - m).iter().all(|e| e.norm() < 1e-8));
    }
}

#[test]
fn poisson_tail_and_truncation() {
    let tail = poisson_tail(1.0, 0);
    assert!((tail - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    let n = auto_nmax(1.0, 1e-14);
    assert!(poisson_tail(1.0, n) < 1e-14);
    assert!(poisson_tail(1.0, n - 1) >= 1e-14);
    assert!(poisson_tail(4.0, 3) > poisson_tail(4.0, 10));
}

#[test]
fn root_selection_helper() {
    let w = c(-4.0, 1e-3);
    assert!((sqrt_near(w, None) - w.sqrt()).norm() < 1e-16);
    assert!((sqrt_near(w, Some(c(0.0, -2.0))) + w.sqrt()).norm() < 1e-16);
}
