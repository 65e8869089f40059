//! Semiclassical coherent-state propagators `K+` (forward, `exp(-iHT)`)
//! and `K-` (backward, `exp(+iHT)`), and the relations between second
//! derivatives of the action and the tangent-matrix blocks.

use crate::classical_dynamics::{
    eom, eom_jacobian, shoot, simpson, Boundary, Direction, HamiltonianModel, PhaseState, ShootOptions,
    Trajectory,
};
use crate::coherent_states::{canonical_overlap, spin_overlap};
use crate::example_model::ExampleParams;
use crate::linalg::{blocks, diag2, from_blocks, inv2, max_abs, M2, M4};
use crate::{cpowi, two_j, Error, Result, C64, I};

#[derive(Clone, Debug)]
pub struct PropagatorTerm {
    pub traj: Trajectory,
    pub s: C64,
    pub g: C64,
    pub lambda: f64,
    pub d: C64,
    /// `F = S + G + i hbar Lambda`.
    pub f: C64,
}

impl PropagatorTerm {
    /// `D exp(i F / hbar)`.
    pub fn value(&self, hbar: f64) -> C64 {
        self.d * (I * self.f / hbar).exp()
    }
}

fn integral(traj: &Trajectory, mut integrand: impl FnMut(&PhaseState) -> Result<C64>) -> Result<C64> {
    if traj.duration() == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let vals = traj.states.iter().map(&mut integrand).collect::<Result<Vec<_>>>()?;
    simpson(&vals, traj.times[1] - traj.times[0])
}

/// `(i/hbar) S` including the boundary terms.
pub fn action_exponent(traj: &Trajectory, model: &dyn HamiltonianModel) -> Result<C64> {
    let j = model.j();
    let hb = model.hbar();
    let body = integral(traj, |x| {
        let d = eom(x, model)?;
        Ok(0.5 * (d.va * x.ua - x.va * d.ua) + j * (d.vb * x.ub - x.vb * d.ub) / x.chart()
            - I / hb * model.value(x))
    })?;
    let a = traj.initial();
    let b = traj.last();
    let edge = 0.5 * (a.ua * a.va + b.ua * b.va) + j * (a.chart().ln() + b.chart().ln());
    Ok(traj.direction.sign() * body + edge)
}

pub fn action_s(traj: &Trajectory, model: &dyn HamiltonianModel) -> Result<C64> {
    Ok(-I * model.hbar() * action_exponent(traj, model)?)
}

/// `(i/hbar) G`.
pub fn correction_exponent(traj: &Trajectory, model: &dyn HamiltonianModel) -> Result<C64> {
    let hb = model.hbar();
    let body = integral(traj, |x| {
        x.check_chart()?;
        let jac = eom_jacobian(x, model);
        Ok(I / hb * model.hess_mixed(x) + 0.5 * (jac[3][3] - jac[1][1]))
    })?;
    Ok(traj.direction.sign() * 0.5 * body)
}

pub fn correction_g(traj: &Trajectory, model: &dyn HamiltonianModel) -> Result<C64> {
    Ok(-I * model.hbar() * correction_exponent(traj, model)?)
}

pub fn normalization_lambda(zb: C64, zk: C64, sb: C64, sk: C64, j: f64) -> f64 {
    0.5 * (zb.norm_sqr() + zk.norm_sqr()) + j * ((1.0 + sb.norm_sqr()) * (1.0 + sk.norm_sqr())).ln()
}

/// Picks the square root of `w` closest to `hint`, principal otherwise.
pub fn sqrt_near(w: C64, hint: Option<C64>) -> C64 {
    let r = w.sqrt();
    match hint {
        Some(h) if (r + h).norm() < (r - h).norm() => -r,
        _ => r,
    }
}

pub fn prefactor_d(m: &M4, initial: &PhaseState, last: &PhaseState, dir: Direction, hint: Option<C64>) -> Result<C64> {
    let (uu, _, _, vv) = blocks(m);
    let det = match dir {
        Direction::Forward => vv.determinant(),
        Direction::Backward => uu.determinant(),
    };
    if det.norm() < 1e-13 {
        return Err(Error::Caustic { det: det.norm() });
    }
    Ok(sqrt_near(last.chart() / initial.chart() / det, hint))
}

/// Bra and ket labels of a propagator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Labels {
    pub zb: C64,
    pub sb: C64,
    pub zk: C64,
    pub sk: C64,
}

impl Labels {
    pub fn boundary(&self, dir: Direction) -> Boundary {
        match dir {
            Direction::Forward => Boundary { initial: [self.zk, self.sk], last: [self.zb.conj(), self.sb.conj()] },
            Direction::Backward => Boundary { initial: [self.zb.conj(), self.sb.conj()], last: [self.zk, self.sk] },
        }
    }
}

pub fn propagator_term(traj: Trajectory, labels: &Labels, model: &dyn HamiltonianModel) -> Result<PropagatorTerm> {
    let hb = model.hbar();
    let s = action_s(&traj, model)?;
    let g = correction_g(&traj, model)?;
    let lambda = normalization_lambda(labels.zb, labels.zk, labels.sb, labels.sk, model.j());
    let d = prefactor_d(&traj.m, traj.initial(), traj.last(), traj.direction, None)?;
    let f = s + g + I * hb * lambda;
    Ok(PropagatorTerm { traj, s, g, lambda, d, f })
}

/// All converged, deduplicated terms plus the per-seed failures.
pub fn k_semiclassical_terms(
    labels: &Labels,
    t_final: f64,
    model: &dyn HamiltonianModel,
    seeds: &[[C64; 2]],
    dir: Direction,
    opts: &ShootOptions,
) -> (Vec<PropagatorTerm>, Vec<Error>) {
    let boundary = labels.boundary(dir);
    let mut terms: Vec<PropagatorTerm> = Vec::new();
    let mut errors = Vec::new();
    for seed in seeds {
        let solved = shoot(&boundary, dir, model, t_final, *seed, opts).and_then(|tr| propagator_term(tr, labels, model));
        match solved {
            Ok(term) => {
                if terms.iter().all(|t| t.traj.initial().dist(term.traj.initial()) > 1e-8) {
                    terms.push(term);
                }
            }
            Err(e) => errors.push(e),
        }
    }
    (terms, errors)
}

/// Sum of `D exp(iF/hbar)` over the trajectories reached from `seeds`.
pub fn k_semiclassical(
    labels: &Labels,
    t_final: f64,
    model: &dyn HamiltonianModel,
    seeds: &[[C64; 2]],
    dir: Direction,
    opts: &ShootOptions,
) -> Result<C64> {
    let (terms, _) = k_semiclassical_terms(labels, t_final, model, seeds, dir, opts);
    if terms.is_empty() {
        return Err(Error::EmptySum);
    }
    Ok(terms.iter().map(|t| t.value(model.hbar())).sum())
}

/// `sum_{n > nmax} x^n / n! e^{-x}`, the weight a Poisson series drops.
pub fn poisson_tail(x: f64, nmax: usize) -> f64 {
    let mut term = (-x).exp();
    for n in 1..=nmax + 1 {
        term *= x / n as f64;
    }
    let mut tail = 0.0;
    let mut n = nmax + 1;
    while term > 1e-300 && n < nmax + 10_000 {
        tail += term;
        n += 1;
        term *= x / n as f64;
        if term < tail * 1e-17 {
            break;
        }
    }
    tail
}

/// Smallest `nmax` whose Poisson tail drops below `tol`.
pub fn auto_nmax(x: f64, tol: f64) -> usize {
    let mut n = 1;
    while poisson_tail(x, n) > tol && n < 10_000 {
        n += 1;
    }
    n
}

/// Exact propagator of the example in the product Fock basis.
pub fn k_quantum_example(labels: &Labels, t_final: f64, p: &ExampleParams, nmax: usize, dir: Direction) -> Result<C64> {
    p.validate()?;
    let tj = two_j(p.j)?;
    let wz = labels.zb.conj() * labels.zk;
    let ws = labels.sb.conj() * labels.sk;
    let nz = (-0.5 * (labels.zb.norm_sqr() + labels.zk.norm_sqr())).exp();
    let ns = ((1.0 + labels.sb.norm_sqr()) * (1.0 + labels.sk.norm_sqr())).powf(-p.j);
    let sign = dir.sign();
    let mut total = C64::new(0.0, 0.0);
    let mut zn = C64::new(1.0, 0.0);
    for n in 0..=nmax {
        if n > 0 {
            zn = zn * wz / n as f64;
        }
        let mut binom = 1.0;
        for m in 0..=tj {
            if m > 0 {
                binom = binom * (tj - m + 1) as f64 / m as f64;
            }
            let e = p.hbar * p.lambda / p.j * n as f64 * (m as f64 - p.j);
            let phase = (-I * sign * e * t_final / p.hbar).exp();
            total += zn * binom * cpowi(ws, m) * phase;
        }
    }
    Ok(total * nz * ns)
}

/// The product of overlaps the propagators reduce to at `T = 0`.
pub fn overlap_product(labels: &Labels, j: f64) -> Result<C64> {
    Ok(canonical_overlap(labels.zb, labels.zk) * spin_overlap(labels.sb, labels.sk, j)?)
}

/// Second derivatives of `S` in the `(u, v)` boundary variables of one
/// propagator: forward uses `(u', v'')`, backward `(u'', v')`.
#[derive(Clone, Copy, Debug)]
pub struct SHessians {
    pub uu: M2,
    pub uv: M2,
    pub vu: M2,
    pub vv: M2,
}

fn a_mat(x: &PhaseState, j: f64, hbar: f64) -> M2 {
    let c = x.chart();
    diag2(C64::new(0.0, 0.0), -2.0 * I * j * hbar / (c * c))
}

fn b_mat(x: &PhaseState, j: f64, hbar: f64) -> M2 {
    let c = x.chart();
    diag2(-I * hbar, -2.0 * I * j * hbar / (c * c))
}

/// Action Hessians predicted by the tangent matrix.
pub fn s_from_m(m: &M4, x0: &PhaseState, x1: &PhaseState, dir: Direction, j: f64, hbar: f64) -> Result<SHessians> {
    let (muu, muv, mvu, mvv) = blocks(m);
    let (a0, a1) = (a_mat(x0, j, hbar), a_mat(x1, j, hbar));
    let (b0, b1) = (b_mat(x0, j, hbar), b_mat(x1, j, hbar));
    Ok(match dir {
        Direction::Forward => {
            let vinv = inv2(&mvv)?;
            SHessians {
                uu: -b0 * vinv * mvu - a0 * (x0.vb * x0.vb),
                uv: b0 * vinv,
                vu: b1 * (muu - muv * vinv * mvu),
                vv: b1 * muv * vinv - a1 * (x1.ub * x1.ub),
            }
        }
        Direction::Backward => {
            let uinv = inv2(&muu)?;
            SHessians {
                uu: b1 * mvu * uinv - a1 * (x1.vb * x1.vb),
                uv: b1 * (mvv - mvu * uinv * muv),
                vu: b0 * uinv,
                vv: -b0 * uinv * muv - a0 * (x0.ub * x0.ub),
            }
        }
    })
}

/// Tangent matrix rebuilt from action Hessians.
pub fn m_from_s(s: &SHessians, x0: &PhaseState, x1: &PhaseState, dir: Direction, j: f64, hbar: f64) -> Result<M4> {
    let (a0, a1) = (a_mat(x0, j, hbar), a_mat(x1, j, hbar));
    let (b0, b1) = (b_mat(x0, j, hbar), b_mat(x1, j, hbar));
    let b1inv = inv2(&b1)?;
    Ok(match dir {
        Direction::Forward => {
            let p = s.vv + a1 * (x1.ub * x1.ub);
            let q = s.uu + a0 * (x0.vb * x0.vb);
            let uvinv = inv2(&s.uv)?;
            from_blocks(&(b1inv * (s.vu - p * uvinv * q)), &(b1inv * p * uvinv * b0), &(-uvinv * q), &(uvinv * b0))
        }
        Direction::Backward => {
            let p = s.vv + a0 * (x0.ub * x0.ub);
            let q = s.uu + a1 * (x1.vb * x1.vb);
            let vuinv = inv2(&s.vu)?;
            from_blocks(&(vuinv * b0), &(-vuinv * p), &(b1inv * q * vuinv * b0), &(b1inv * (s.uv - q * vuinv * p)))
        }
    })
}

/// Action Hessians by fourth-order central differences of [`action_s`]
/// over re-solved boundary-value problems.
pub fn action_hessians_fd(
    boundary: &Boundary,
    dir: Direction,
    model: &dyn HamiltonianModel,
    t_final: f64,
    seed: [C64; 2],
    opts: &ShootOptions,
    h: f64,
) -> Result<SHessians> {
    let base = [boundary.initial[0], boundary.initial[1], boundary.last[0], boundary.last[1]];
    let s_at = |shift: [f64; 4]| -> Result<C64> {
        let mut b = *boundary;
        for k in 0..4 {
            let v = base[k] + shift[k];
            if k < 2 {
                b.initial[k] = v;
            } else {
                b.last[k - 2] = v;
            }
        }
        let tr = shoot(&b, dir, model, t_final, seed, opts).map_err(|e| Error::FiniteDifference(e.to_string()))?;
        action_s(&tr, model)
    };
    let w = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
    let mut hess = [[C64::new(0.0, 0.0); 4]; 4];
    let s0 = s_at([0.0; 4])?;
    for a in 0..4 {
        // pure second derivative
        let mut acc = -30.0 * s0;
        for (k, c) in [(-2.0, -1.0), (-1.0, 16.0), (1.0, 16.0), (2.0, -1.0)] {
            let mut sh = [0.0; 4];
            sh[a] = k * h;
            acc += c * s_at(sh)?;
        }
        hess[a][a] = acc / (12.0 * h * h);
        for b in (a + 1)..4 {
            let mut acc = C64::new(0.0, 0.0);
            for (ka, wa) in w {
                for (kb, wb) in w {
                    let mut sh = [0.0; 4];
                    sh[a] = ka * h;
                    sh[b] = kb * h;
                    acc += wa * wb * s_at(sh)?;
                }
            }
            hess[a][b] = acc / (h * h);
            hess[b][a] = hess[a][b];
        }
    }
    // variables are [initial0, initial1, last0, last1]
    let pick = |r: usize, c: usize| M2::new(hess[r][c], hess[r][c + 1], hess[r + 1][c], hess[r + 1][c + 1]);
    let (u, v) = match dir {
        Direction::Forward => (0, 2),
        Direction::Backward => (2, 0),
    };
    Ok(SHessians { uu: pick(u, u), uv: pick(u, v), vu: pick(v, u), vv: pick(v, v) })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct HessianReport {
    /// Action Hessians from `M` against the differenced ones.
    pub sm: f64,
    /// `M` rebuilt from the differenced Hessians against `M`.
    pub ms: f64,
    /// `M` -> Hessians -> `M` without any differencing.
    pub roundtrip: f64,
}

impl HessianReport {
    pub fn max(&self) -> f64 {
        self.sm.max(self.ms).max(self.roundtrip)
    }
}

/// Residuals of the two identity groups belonging to one direction.
pub fn hessian_roundtrip(traj: &Trajectory, s: &SHessians, j: f64, hbar: f64) -> Result<HessianReport> {
    let (x0, x1, dir) = (traj.initial(), traj.last(), traj.direction);
    let pred = s_from_m(&traj.m, x0, x1, dir, j, hbar)?;
    let sm = [pred.uu - s.uu, pred.uv - s.uv, pred.vu - s.vu, pred.vv - s.vv]
        .iter()
        .map(max_abs)
        .fold(0.0, f64::max);
    let m_fd = m_from_s(s, x0, x1, dir, j, hbar)?;
    let ms = max_abs(&(m_fd - traj.m));
    let back = m_from_s(&pred, x0, x1, dir, j, hbar)?;
    let roundtrip = max_abs(&(back - traj.m));
    Ok(HessianReport { sm, ms, roundtrip })
}

/// Solves one propagator boundary problem from a seed and checks both
/// identity groups for it.
pub fn hessian_identity_check(
    labels: &Labels,
    dir: Direction,
    model: &dyn HamiltonianModel,
    t_final: f64,
    seed: [C64; 2],
    opts: &ShootOptions,
    h: f64,
) -> Result<HessianReport> {
    let boundary = labels.boundary(dir);
    let traj = shoot(&boundary, dir, model, t_final, seed, opts)?;
    let free = match dir {
        Direction::Forward => [traj.initial().va, traj.initial().vb],
        Direction::Backward => [traj.initial().ua, traj.initial().ub],
    };
    let s = action_hessians_fd(&boundary, dir, model, t_final, free, opts, h)?;
    hessian_roundtrip(&traj, &s, model.j(), model.hbar())
}

/// `D` from the determinant of action Hessians rather than from `M`.
pub fn prefactor_from_hessians(s: &SHessians, x0: &PhaseState, x1: &PhaseState, dir: Direction, j: f64, hbar: f64) -> C64 {
    let block = match dir {
        Direction::Forward => s.uv,
        Direction::Backward => s.vu,
    };
    let det = (block * (I / hbar)).determinant();
    (x0.chart() * x1.chart() / (2.0 * j) * det).sqrt()
}
