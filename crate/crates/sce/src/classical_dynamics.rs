//! Complexified classical dynamics: equations of motion, RK4 with the
//! variational equations carried along, and a shooting solver for the
//! mixed initial/final boundary data of the propagators.

use serde::{Deserialize, Serialize};

use crate::linalg::{blocks, inv2, M2, M4};
use crate::{Error, Result, C64, I};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub ua: C64,
    pub ub: C64,
    pub va: C64,
    pub vb: C64,
}

impl PhaseState {
    pub fn new(ua: C64, ub: C64, va: C64, vb: C64) -> Self {
        PhaseState { ua, ub, va, vb }
    }

    /// The real-slice point `u = label`, `v = conj(label)`.
    pub fn real(z: C64, s: C64) -> Self {
        PhaseState { ua: z, ub: s, va: z.conj(), vb: s.conj() }
    }

    pub fn to_array(&self) -> [C64; 4] {
        [self.ua, self.ub, self.va, self.vb]
    }

    pub fn from_array(a: [C64; 4]) -> Self {
        PhaseState { ua: a[0], ub: a[1], va: a[2], vb: a[3] }
    }

    pub fn chart(&self) -> C64 {
        1.0 + self.ub * self.vb
    }

    pub fn check_chart(&self) -> Result<()> {
        if self.chart().norm() < 1e-10 || !self.to_array().iter().all(|x| x.is_finite()) {
            return Err(Error::SingularChart);
        }
        Ok(())
    }

    pub fn dist(&self, other: &PhaseState) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        (0..4).map(|k| (a[k] - b[k]).norm()).fold(0.0, f64::max)
    }
}

/// A classical Hamiltonian `H(uA, uB, vA, vB)` on the complexified space.
pub trait HamiltonianModel: Sync {
    fn j(&self) -> f64;
    fn hbar(&self) -> f64;
    fn value(&self, x: &PhaseState) -> C64;
    /// `dH/d(uA, uB, vA, vB)`.
    fn grad(&self, x: &PhaseState) -> [C64; 4];
    /// Full symmetric matrix of second partials in the same ordering.
    fn hessian(&self, x: &PhaseState) -> [[C64; 4]; 4];

    /// The mixed partial `d2H / duA dvA`.
    fn hess_mixed(&self, x: &PhaseState) -> C64 {
        self.hessian(x)[0][2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub direction: Direction,
    /// Tangent matrix from the first to the last stored state.
    pub m: M4,
}

impl Trajectory {
    pub fn initial(&self) -> &PhaseState {
        &self.states[0]
    }

    pub fn last(&self) -> &PhaseState {
        self.states.last().unwrap()
    }

    pub fn duration(&self) -> f64 {
        self.times.last().unwrap() - self.times[0]
    }
}

/// Right-hand side of the equations of motion.
pub fn eom(x: &PhaseState, model: &dyn HamiltonianModel) -> Result<PhaseState> {
    x.check_chart()?;
    let g = model.grad(x);
    let hb = model.hbar();
    let k = I * x.chart() * x.chart() / (2.0 * model.j() * hb);
    Ok(PhaseState {
        ua: -I / hb * g[2],
        ub: -k * g[3],
        va: I / hb * g[0],
        vb: k * g[1],
    })
}

/// Jacobian of [`eom`]; row is the derivative index, column the coordinate.
pub fn eom_jacobian(x: &PhaseState, model: &dyn HamiltonianModel) -> [[C64; 4]; 4] {
    let g = model.grad(x);
    let h = model.hessian(x);
    let hb = model.hbar();
    let c = x.chart();
    let k = I * c * c / (2.0 * model.j() * hb);
    // derivative of (1 + uB vB)^2 along each coordinate
    let dk = [
        C64::new(0.0, 0.0),
        I * 2.0 * c * x.vb / (2.0 * model.j() * hb),
        C64::new(0.0, 0.0),
        I * 2.0 * c * x.ub / (2.0 * model.j() * hb),
    ];
    let mut jac = [[C64::new(0.0, 0.0); 4]; 4];
    for col in 0..4 {
        jac[0][col] = -I / hb * h[2][col];
        jac[1][col] = -(dk[col] * g[3] + k * h[3][col]);
        jac[2][col] = I / hb * h[0][col];
        jac[3][col] = dk[col] * g[1] + k * h[1][col];
    }
    jac
}

fn deriv(x: &PhaseState, m: &M4, model: &dyn HamiltonianModel) -> Result<(PhaseState, M4)> {
    let dx = eom(x, model)?;
    let jac = eom_jacobian(x, model);
    let jm = M4::from_fn(|r, c| jac[r][c]);
    Ok((dx, jm * m))
}

fn axpy(x: &PhaseState, h: f64, d: &PhaseState) -> PhaseState {
    PhaseState {
        ua: x.ua + d.ua * h,
        ub: x.ub + d.ub * h,
        va: x.va + d.va * h,
        vb: x.vb + d.vb * h,
    }
}

/// Classic RK4 over `[0, T]` on the augmented state (point plus tangent
/// matrix). Negative `T` integrates backwards in time.
pub fn integrate(initial: &PhaseState, t_final: f64, model: &dyn HamiltonianModel, steps: usize) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    initial.check_chart()?;
    if t_final == 0.0 {
        return Ok(Trajectory {
            times: vec![0.0],
            states: vec![*initial],
            direction: Direction::Forward,
            m: M4::identity(),
        });
    }
    let h = t_final / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = *initial;
    let mut m = M4::identity();
    times.push(0.0);
    states.push(x);
    for n in 0..steps {
        let t = n as f64 * h;
        let fail = |_| Error::StepFailure { t };
        let (k1, l1) = deriv(&x, &m, model).map_err(fail)?;
        let (k2, l2) = deriv(&axpy(&x, 0.5 * h, &k1), &(m + l1 * C64::from(0.5 * h)), model).map_err(fail)?;
        let (k3, l3) = deriv(&axpy(&x, 0.5 * h, &k2), &(m + l2 * C64::from(0.5 * h)), model).map_err(fail)?;
        let (k4, l4) = deriv(&axpy(&x, h, &k3), &(m + l3 * C64::from(h)), model).map_err(fail)?;
        let mut sum = axpy(&k1, 2.0, &k2);
        sum = axpy(&sum, 2.0, &k3);
        sum = axpy(&sum, 1.0, &k4);
        x = axpy(&x, h / 6.0, &sum);
        m += (l1 + l2 * C64::from(2.0) + l3 * C64::from(2.0) + l4) * C64::from(h / 6.0);
        if x.check_chart().is_err() {
            return Err(Error::StepFailure { t: t + h });
        }
        times.push((n + 1) as f64 * h);
        states.push(x);
    }
    Ok(Trajectory { times, states, direction: Direction::Forward, m })
}

/// The tangent matrix of an already integrated trajectory, recomputed on
/// its own grid.
pub fn integrate_tangent(traj: &Trajectory, model: &dyn HamiltonianModel) -> Result<M4> {
    let steps = traj.times.len().saturating_sub(1);
    if steps == 0 {
        return Ok(M4::identity());
    }
    Ok(integrate(traj.initial(), traj.duration(), model, steps)?.m)
}

/// Boundary data for [`shoot`]. Forward fixes `u'` and `v''`, backward
/// fixes `v'` and `u''`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    /// `(uA', uB')` forward, `(vA', vB')` backward.
    pub initial: [C64; 2],
    /// `(vA'', vB'')` forward, `(uA'', uB'')` backward.
    pub last: [C64; 2],
}

#[derive(Clone, Copy, Debug)]
pub struct ShootOptions {
    pub steps: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions { steps: 4096, max_iter: 50, tol: 1e-12 }
    }
}

fn assemble(b: &Boundary, unknown: [C64; 2], dir: Direction) -> PhaseState {
    match dir {
        Direction::Forward => PhaseState::new(b.initial[0], b.initial[1], unknown[0], unknown[1]),
        Direction::Backward => PhaseState::new(unknown[0], unknown[1], b.initial[0], b.initial[1]),
    }
}

fn mismatch(b: &Boundary, traj: &Trajectory, dir: Direction) -> [C64; 2] {
    let f = traj.last();
    match dir {
        Direction::Forward => [f.va - b.last[0], f.vb - b.last[1]],
        Direction::Backward => [f.ua - b.last[0], f.ub - b.last[1]],
    }
}

fn norm2(r: &[C64; 2]) -> f64 {
    (r[0].norm_sqr() + r[1].norm_sqr()).sqrt()
}

/// Newton shooting on the two free initial coordinates. The Jacobian is
/// `M_vv` forward and `M_uu` backward; steps are halved up to 8 times when
/// the residual does not drop. After reaching `tol` the iteration keeps
/// polishing while the residual still decreases.
pub fn shoot(
    boundary: &Boundary,
    dir: Direction,
    model: &dyn HamiltonianModel,
    t_final: f64,
    seed: [C64; 2],
    opts: &ShootOptions,
) -> Result<Trajectory> {
    let run = |y: [C64; 2]| -> Result<(Trajectory, [C64; 2])> {
        let x0 = assemble(boundary, y, dir);
        let steps = if t_final == 0.0 { 1 } else { opts.steps };
        let mut tr = integrate(&x0, t_final, model, steps)?;
        tr.direction = dir;
        let r = mismatch(boundary, &tr, dir);
        Ok((tr, r))
    };
    let mut y = seed;
    let (mut tr, mut r) = run(y)?;
    let mut res = norm2(&r);
    let mut converged_at: Option<usize> = None;
    for it in 0..opts.max_iter {
        if res < opts.tol && converged_at.is_none() {
            converged_at = Some(it);
        }
        if let Some(c) = converged_at {
            if it >= c + 2 || res == 0.0 {
                break;
            }
        }
        let (uu, _, _, vv) = blocks(&tr.m);
        let jb: M2 = match dir {
            Direction::Forward => vv,
            Direction::Backward => uu,
        };
        let jinv = inv2(&jb)?;
        let step = jinv * nalgebra::Vector2::new(r[0], r[1]);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=8 {
            let trial = [y[0] - step[0] * lambda, y[1] - step[1] * lambda];
            if let Ok((t2, r2)) = run(trial) {
                let n2 = norm2(&r2);
                if n2 < res {
                    y = trial;
                    tr = t2;
                    r = r2;
                    res = n2;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res < opts.tol {
        Ok(tr)
    } else {
        Err(Error::Divergence { residual: res })
    }
}

/// Composite Simpson rule on a uniform grid; an even number of intervals
/// is required, otherwise the last interval is closed with the 3/8 rule.
pub fn simpson(values: &[C64], h: f64) -> Result<C64> {
    let n = values.len();
    if n < 3 {
        return Err(Error::GridTooCoarse(n));
    }
    let intervals = n - 1;
    let (even, tail) = if intervals % 2 == 0 { (intervals, 0) } else { (intervals - 3, 3) };
    let mut s = C64::new(0.0, 0.0);
    if even > 0 {
        s += values[0] + values[even];
        for k in 1..even {
            s += values[k] * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s *= h / 3.0;
    }
    if tail == 3 {
        let a = even;
        s += (values[a] + values[a + 1] * 3.0 + values[a + 2] * 3.0 + values[a + 3]) * (3.0 * h / 8.0);
    }
    Ok(s)
}
