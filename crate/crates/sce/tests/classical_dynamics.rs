use sce::classical_dynamics::*;
use sce::example_model::{analytic_tangent, analytic_trajectory, ExampleParams};
use sce::linalg::M4;
use sce::{Error, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn params() -> ExampleParams {
    ExampleParams::default()
}

fn complex_state() -> PhaseState {
    PhaseState::new(c(0.8, 0.3), c(0.6, -0.4), c(1.1, -0.2), c(0.9, 0.5))
}

fn max_entry(m: &M4) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

#[test]
fn eom_example_cases() {
    let model = params().model();
    let empty = PhaseState::new(c(0.0, 0.0), c(0.7, 0.2), c(0.0, 0.0), c(0.3, 0.1));
    let d = eom(&empty, &model).unwrap();
    assert_eq!((d.ub, d.vb), (c(0.0, 0.0), c(0.0, 0.0)));
    let equator = PhaseState::new(c(0.4, 0.1), c(2.0, 0.0), c(0.5, 0.0), c(0.5, 0.0));
    let d = eom(&equator, &model).unwrap();
    assert!(d.ua.norm() < 1e-16 && d.va.norm() < 1e-16);
    let ones = PhaseState::new(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0));
    let d = eom(&ones, &model).unwrap();
    assert!(d.ua.norm() < 1e-16 && d.va.norm() < 1e-16);
    assert!((d.ub - c(0.0, -0.2)).norm() < 1e-15);
    assert!((d.vb - c(0.0, 0.2)).norm() < 1e-15);
}

#[test]
fn eom_rejects_singular_chart() {
    let model = params().model();
    let bad = PhaseState::new(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0));
    assert_eq!(eom(&bad, &model).unwrap_err(), Error::SingularChart);
}

#[test]
fn zero_duration_is_identity() {
    let model = params().model();
    let x = complex_state();
    let tr = integrate(&x, 0.0, &model, 100).unwrap();
    assert_eq!(tr.states.len(), 1);
    assert_eq!(*tr.initial(), x);
    assert_eq!(tr.m, M4::identity());
    assert_eq!(integrate_tangent(&tr, &model).unwrap(), M4::identity());
    assert!(integrate(&x, 1.0, &model, 0).is_err());
}

#[test]
fn rk4_matches_analytic_flow() {
    let p = params();
    let model = p.model();
    let x = complex_state();
    let tr = integrate(&x, 1.0, &model, 4096).unwrap();
    let exact = analytic_trajectory(&x, 1.0, &p).unwrap();
    assert!(tr.last().dist(&exact) < 1e-9, "{}", tr.last().dist(&exact));
    let m = analytic_tangent(&x, 1.0, &p).unwrap();
    assert!(max_entry(&(tr.m - m)) < 1e-8);
    assert!(max_entry(&(integrate_tangent(&tr, &model).unwrap() - m)) < 1e-8);
}

#[test]
fn time_reversal_returns_to_start() {
    let model = params().model();
    let x = complex_state();
    let fwd = integrate(&x, 2.0, &model, 2048).unwrap();
    let back = integrate(fwd.last(), -2.0, &model, 2048).unwrap();
    assert!(back.last().dist(&x) < 1e-8);
}

#[test]
fn tangent_matches_finite_differences() {
    let model = params().model();
    let x = complex_state();
    let t = 1.3;
    let steps = 2048;
    let m = integrate(&x, t, &model, steps).unwrap().m;
    let eps = 1e-6;
    for k in 0..4 {
        let mut plus = x.to_array();
        let mut minus = x.to_array();
        plus[k] += eps;
        minus[k] -= eps;
        let fp = integrate(&PhaseState::from_array(plus), t, &model, steps).unwrap().last().to_array();
        let fm = integrate(&PhaseState::from_array(minus), t, &model, steps).unwrap().last().to_array();
        for r in 0..4 {
            let fd = (fp[r] - fm[r]) / (2.0 * eps);
            assert!((fd - m[(r, k)]).norm() < 1e-5 * (1.0 + m[(r, k)].norm()), "entry ({r},{k})");
        }
    }
}

#[test]
fn tangent_composes() {
    let model = params().model();
    let x = complex_state();
    let a = integrate(&x, 0.7, &model, 1400).unwrap();
    let b = integrate(a.last(), 0.6, &model, 1200).unwrap();
    let whole = integrate(&x, 1.3, &model, 2600).unwrap();
    assert!(max_entry(&(b.m * a.m - whole.m)) < 1e-8);
}

#[test]
fn conserved_quantities() {
    let p = params();
    let model = p.model();
    let x = complex_state();
    let tr = integrate(&x, p.period(), &model, 4096).unwrap();
    let (pa, pb, h0) = (x.ua * x.va, x.ub * x.vb, model.value(&x));
    for s in &tr.states {
        assert!((s.ua * s.va - pa).norm() < 1e-10);
        assert!((s.ub * s.vb - pb).norm() < 1e-10);
        assert!((model.value(s) - h0).norm() < 1e-9);
    }
}

#[test]
fn real_slice_is_invariant() {
    let p = params();
    let model = p.model();
    let x = PhaseState::real(c(0.9, -0.4), c(1.2, 0.7));
    let tr = integrate(&x, 3.0, &model, 3000).unwrap();
    for s in &tr.states {
        assert!((s.ua - s.va.conj()).norm() < 1e-10);
        assert!((s.ub - s.vb.conj()).norm() < 1e-10);
    }
}

fn boundary_of(tr: &Trajectory, dir: Direction) -> (Boundary, [C64; 2]) {
    let (a, b) = (tr.initial(), tr.last());
    match dir {
        Direction::Forward => (Boundary { initial: [a.ua, a.ub], last: [b.va, b.vb] }, [a.va, a.vb]),
        Direction::Backward => (Boundary { initial: [a.va, a.vb], last: [b.ua, b.ub] }, [a.ua, a.ub]),
    }
}

#[test]
fn shooting_recovers_real_trajectory_immediately() {
    let p = params();
    let model = p.model();
    let x = PhaseState::real(c(1.0, 0.0), c(1.0, 0.0));
    let t = p.time(0.1);
    let reference = integrate(&x, t, &model, 4096).unwrap();
    for dir in [Direction::Forward, Direction::Backward] {
        let (b, free) = boundary_of(&reference, dir);
        let opts = ShootOptions { max_iter: 1, ..Default::default() };
        let tr = shoot(&b, dir, &model, t, free, &opts).unwrap();
        assert!(tr.initial().dist(&x) < 1e-12);
        assert_eq!(tr.direction, dir);
    }
}

#[test]
fn shooting_reconverges_from_perturbed_seed() {
    let p = params();
    let model = p.model();
    let x = complex_state();
    let t = p.time(0.05);
    let end = analytic_trajectory(&x, t, &p).unwrap();
    let fwd = Boundary { initial: [x.ua, x.ub], last: [end.va, end.vb] };
    let seed = [x.va * 1.01, x.vb * c(1.0, 0.01)];
    let tr = shoot(&fwd, Direction::Forward, &model, t, seed, &ShootOptions::default()).unwrap();
    assert!((tr.initial().va - x.va).norm() < 1e-10);
    assert!((tr.initial().vb - x.vb).norm() < 1e-10);
    let bwd = Boundary { initial: [x.va, x.vb], last: [end.ua, end.ub] };
    let seed = [x.ua * 0.99, x.ub * c(1.0, -0.01)];
    let tr = shoot(&bwd, Direction::Backward, &model, t, seed, &ShootOptions::default()).unwrap();
    assert!((tr.initial().ua - x.ua).norm() < 1e-10);
    assert!((tr.initial().ub - x.ub).norm() < 1e-10);
}

#[test]
fn shooting_at_zero_duration() {
    let model = params().model();
    // at T = 0 the free coordinates are the fixed final ones, always solvable
    let b = Boundary { initial: [c(1.0, 0.0), c(0.5, 0.0)], last: [c(0.3, 0.2), c(0.4, -0.1)] };
    let tr = shoot(&b, Direction::Forward, &model, 0.0, [c(0.0, 0.0), c(0.0, 0.0)], &ShootOptions::default()).unwrap();
    assert_eq!([tr.initial().va, tr.initial().vb], b.last);
    // boundary data on the singular chart admits no trajectory
    let bad = Boundary { initial: [c(1.0, 0.0), c(1.0, 0.0)], last: [c(1.0, 0.0), c(-1.0, 0.0)] };
    assert!(shoot(&bad, Direction::Forward, &model, 0.0, [c(1.0, 0.0), c(-1.0, 0.0)], &ShootOptions::default()).is_err());
}

#[test]
fn shooting_reports_divergence() {
    let p = params();
    let model = p.model();
    let x = complex_state();
    let t = p.time(0.05);
    let end = analytic_trajectory(&x, t, &p).unwrap();
    let b = Boundary { initial: [x.ua, x.ub], last: [end.va, end.vb] };
    let opts = ShootOptions { max_iter: 1, tol: 1e-30, ..Default::default() };
    let err = shoot(&b, Direction::Forward, &model, t, [x.va * 1.3, x.vb * 0.6], &opts).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }));
}

#[test]
fn simpson_rules() {
    let f = |x: f64| c(x * x * x - 2.0 * x, 0.5 * x * x);
    let exact = |a: f64| c(a.powi(4) / 4.0 - a * a, a.powi(3) / 6.0);
    for n in [3usize, 4, 9, 10] {
        let h = 2.0 / (n - 1) as f64;
        let v: Vec<C64> = (0..n).map(|k| f(k as f64 * h)).collect();
        assert!((simpson(&v, h).unwrap() - exact(2.0)).norm() < 1e-13, "n = {n}");
    }
    assert_eq!(simpson(&[c(1.0, 0.0); 2], 0.1).unwrap_err(), Error::GridTooCoarse(2));
}

#[test]
fn phase_state_helpers() {
    let x = complex_state();
    assert_eq!(PhaseState::from_array(x.to_array()), x);
    assert_eq!(x.dist(&x), 0.0);
    assert!((x.chart() - (1.0 + x.ub * x.vb)).norm() < 1e-16);
    let r = PhaseState::real(c(0.2, 0.3), c(0.4, 0.5));
    assert_eq!(r.va, c(0.2, -0.3));
    assert_eq!(r.vb, c(0.4, -0.5));
    assert_eq!(Direction::Forward.sign(), 1.0);
    assert_eq!(Direction::Backward.sign(), -1.0);
}
