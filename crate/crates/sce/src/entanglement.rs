//! Linear entanglement entropy `E = 1 - Tr rho_s^2`: the exact quantum
//! value, a dense-state oracle, and the semiclassical sum over sets of four
//! complex trajectories.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::classical_dynamics::{integrate, simpson, Direction, HamiltonianModel, PhaseState, Trajectory, eom, eom_jacobian};
use crate::example_model::{analytic_tangent, analytic_trajectory, ExampleParams};
use crate::linalg::{blocks, diag2, M2, M4, M8};
use crate::propagator::{auto_nmax, sqrt_near};
use crate::rootfinder::{distinct_mask, f_z, partners4, Root, RootFamily};
use crate::{cpowi, Error, Result, C64, I};

/// Fock weights `e^{-a} a^n / n!`, `n = 0..=nmax`.
pub fn weights_z(a: f64, nmax: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(nmax + 1);
    let mut t = (-a).exp();
    for n in 0..=nmax {
        if n > 0 {
            t *= a / n as f64;
        }
        w.push(t);
    }
    w
}

/// Spin weights `C(2j, m) sigma^m / (1 + sigma)^{2j}`.
pub fn weights_s(sigma: f64, two_j: u32) -> Vec<f64> {
    let q = sigma / (1.0 + sigma);
    let r = 1.0 / (1.0 + sigma);
    let mut out = Vec::with_capacity(two_j as usize + 1);
    let mut binom = 1.0;
    for m in 0..=two_j {
        if m > 0 {
            binom = binom * (two_j - m + 1) as f64 / m as f64;
        }
        out.push(binom * q.powi(m as i32) * r.powi((two_j - m) as i32));
    }
    out
}

fn normalized(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// `nmax` in use: the given one or the smallest with Poisson tail < 1e-14.
pub fn resolve_nmax(p: &ExampleParams, nmax: Option<usize>) -> usize {
    nmax.unwrap_or_else(|| auto_nmax(p.a(), 1e-14))
}

/// The quadruple sum over `(n_z, m_z, n_s, m_s)` of renormalised truncated
/// weights with phases `exp(-2 pi i tau (n_z - m_z)(n_s - m_s))`; the sum is
/// the purity. It is grouped by the differences `d_z`, `d_s` through the
/// weight autocorrelations, which keeps `E(0)` at roundoff level.
pub fn exact_entropy(p: &ExampleParams, tau: f64, nmax: Option<usize>) -> Result<f64> {
    p.validate()?;
    let n = resolve_nmax(p, nmax);
    let a = autocorrelation(&normalized(weights_z(p.a(), n)));
    let b = autocorrelation(&normalized(weights_s(p.sigma(), p.two_j())));
    let mut purity = 0.0;
    for (dz, ad) in a.iter().enumerate() {
        for (ds, bd) in b.iter().enumerate() {
            // the four sign combinations of nonzero lags pair into a cosine
            let c = match (dz, ds) {
                (0, 0) => 1.0,
                (0, _) | (_, 0) => 2.0,
                _ => 4.0 * (2.0 * PI * tau * (dz * ds) as f64).cos(),
            };
            purity += ad * bd * c;
        }
    }
    Ok(1.0 - purity)
}

/// `sum_k w_k w_{k+d}` for `d = 0..len`.
fn autocorrelation(w: &[f64]) -> Vec<f64> {
    (0..w.len()).map(|d| w.iter().zip(&w[d..]).map(|(x, y)| x * y).sum()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Traced {
    /// Trace out the field, keep the spin.
    Field,
    /// Trace out the spin, keep the field.
    Spin,
}

/// Dense oracle: evolves the truncated (renormalised) product-basis state, forms the
/// reduced density matrix and returns one minus its purity.
pub fn oracle_entropy(p: &ExampleParams, tau: f64, nmax: Option<usize>, traced: Traced) -> Result<f64> {
    p.validate()?;
    let n = resolve_nmax(p, nmax);
    let tj = p.two_j() as usize;
    let t = p.time(tau);
    let mut c = vec![C64::new(0.0, 0.0); n + 1];
    let mut zn = C64::new((-0.5 * p.a()).exp(), 0.0);
    for k in 0..=n {
        if k > 0 {
            zn = zn * p.z0 / (k as f64).sqrt();
        }
        c[k] = zn;
    }
    let cn = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    c.iter_mut().for_each(|x| *x /= cn);
    let mut d = vec![C64::new(0.0, 0.0); tj + 1];
    let mut binom = 1.0f64;
    for m in 0..=tj {
        if m > 0 {
            binom = binom * (tj - m + 1) as f64 / m as f64;
        }
        d[m] = cpowi(p.s0, m as u32) * binom.sqrt() * (1.0 + p.sigma()).powf(-p.j);
    }
    let psi: Vec<Vec<C64>> = (0..=n)
        .map(|k| {
            (0..=tj)
                .map(|m| {
                    let e = p.hbar * p.lambda / p.j * k as f64 * (m as f64 - p.j);
                    c[k] * d[m] * (-I * e * t / p.hbar).exp()
                })
                .collect()
        })
        .collect();
    let purity = match traced {
        Traced::Field => {
            let mut rho = vec![vec![C64::new(0.0, 0.0); tj + 1]; tj + 1];
            for row in &psi {
                for m in 0..=tj {
                    for mp in 0..=tj {
                        rho[m][mp] += row[m] * row[mp].conj();
                    }
                }
            }
            rho.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>()
        }
        Traced::Spin => {
            let mut rho = vec![vec![C64::new(0.0, 0.0); n + 1]; n + 1];
            for k in 0..=n {
                for kp in 0..=n {
                    rho[k][kp] = (0..=tj).map(|m| psi[k][m] * psi[kp][m].conj()).sum();
                }
            }
            rho.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>()
        }
    };
    Ok(1.0 - purity)
}

/// Four trajectories tied together by the entangled boundary conditions.
/// Trajectories 1 and 3 are forward, 2 and 4 backward.
#[derive(Clone, Debug)]
pub struct TrajectorySet {
    pub alpha: [C64; 4],
    pub beta: [C64; 4],
    pub trajectories: [Trajectory; 4],
    pub root: Root,
}

impl TrajectorySet {
    pub fn tangents(&self) -> [M4; 4] {
        [0, 1, 2, 3].map(|l| self.trajectories[l].m)
    }
}

/// Initial points of the four trajectories generated by `alpha1`.
pub fn set_initial_states(alpha1: C64, p: &ExampleParams, tau: f64) -> Result<[PhaseState; 4]> {
    let beta = f_z(alpha1, p, tau)?;
    let (z, s) = (p.z0, p.s0);
    let (zc, sc) = (p.z0.conj(), p.s0.conj());
    Ok([
        PhaseState::new(z, s, zc * alpha1, sc * beta),
        PhaseState::new(z * alpha1, s / beta, zc, sc),
        PhaseState::new(z, s, zc / alpha1, sc / beta),
        PhaseState::new(z / alpha1, s * beta, zc, sc),
    ])
}

const DIRS: [Direction; 4] = [Direction::Forward, Direction::Backward, Direction::Forward, Direction::Backward];

/// Builds the set from the closed-form trajectories and tangent matrices
/// and checks all eight entangled boundary conditions to 1e-9.
pub fn build_trajectory_set(root: &Root, p: &ExampleParams) -> Result<TrajectorySet> {
    let tau = root.tau;
    let t = p.time(tau);
    let init = set_initial_states(root.alpha1, p, tau)?;
    let mut trajs = Vec::with_capacity(4);
    for l in 0..4 {
        let last = analytic_trajectory(&init[l], t, p)?;
        let m = analytic_tangent(&init[l], t, p)?;
        trajs.push(Trajectory { times: vec![0.0, t], states: vec![init[l], last], direction: DIRS[l], m });
    }
    let set = finish_set(root, p, trajs)?;
    let res = boundary_residual(&set);
    if !(res < 1e-9) {
        return Err(Error::BoundaryViolation(res));
    }
    Ok(set)
}

/// Same set with every trajectory integrated by RK4 together with its
/// variational equations.
pub fn integrate_trajectory_set(root: &Root, p: &ExampleParams, steps: usize) -> Result<TrajectorySet> {
    let t = p.time(root.tau);
    let init = set_initial_states(root.alpha1, p, root.tau)?;
    let model = p.model();
    let mut trajs = Vec::with_capacity(4);
    for l in 0..4 {
        let mut tr = integrate(&init[l], t, &model, steps)?;
        tr.direction = DIRS[l];
        trajs.push(tr);
    }
    finish_set(root, p, trajs)
}

fn finish_set(root: &Root, p: &ExampleParams, trajs: Vec<Trajectory>) -> Result<TrajectorySet> {
    let a = root.alpha1;
    let b = f_z(a, p, root.tau)?;
    let trajectories: [Trajectory; 4] = trajs.try_into().map_err(|_| Error::InvalidParameter("need four trajectories".into()))?;
    Ok(TrajectorySet { alpha: [a, a, 1.0 / a, 1.0 / a], beta: [b, 1.0 / b, 1.0 / b, b], trajectories, root: *root })
}

/// Largest mismatch among the eight entangled boundary conditions.
pub fn boundary_residual(set: &TrajectorySet) -> f64 {
    let f: Vec<&PhaseState> = set.trajectories.iter().map(|t| t.last()).collect();
    [
        f[1].ua - f[0].ua,
        f[0].va - f[1].va,
        f[3].ub - f[0].ub,
        f[0].vb - f[3].vb,
        f[3].ua - f[2].ua,
        f[2].va - f[3].va,
        f[1].ub - f[2].ub,
        f[2].vb - f[1].vb,
    ]
    .iter()
    .map(|d| d.norm())
    .fold(0.0, f64::max)
}

/// The 8x8 matrix `R` assembled from the four tangent matrices.
pub fn matrix_r(ms: &[M4; 4]) -> M8 {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let ia = diag2(one, zero);
    let ib = diag2(zero, one);
    let b: Vec<(M2, M2, M2, M2)> = ms.iter().map(blocks).collect();
    let (uu, uv, vu, vv) = (|l: usize| b[l].0, |l: usize| b[l].1, |l: usize| b[l].2, |l: usize| b[l].3);
    let z = M2::zeros();
    let rows: [[M2; 4]; 4] = [
        [uv(0), -ia * uu(1), z, -ib * uu(3)],
        [-ia * vv(0), vu(1), -ib * vv(2), z],
        [z, -ib * uu(1), uv(2), -ia * uu(3)],
        [-ib * vv(0), z, -ia * vv(2), vu(3)],
    ];
    let mut r = M8::zeros();
    for (bi, row) in rows.iter().enumerate() {
        for (bj, blk) in row.iter().enumerate() {
            r.fixed_view_mut::<2, 2>(2 * bi, 2 * bj).copy_from(blk);
        }
    }
    r
}

/// `det R` of the closed-form set generated by `alpha1`.
pub fn det_r_example(alpha1: C64, p: &ExampleParams, tau: f64) -> Option<C64> {
    let init = set_initial_states(alpha1, p, tau).ok()?;
    let t = p.time(tau);
    let mut ms = [M4::identity(); 4];
    for l in 0..4 {
        ms[l] = analytic_tangent(&init[l], t, p).ok()?;
    }
    let d = matrix_r(&ms).determinant();
    d.is_finite().then_some(d)
}

/// The amplitude without `1/sqrt(det R)`, from the trajectory endpoints.
pub fn amplitude_prefactor(set: &TrajectorySet, p: &ExampleParams) -> C64 {
    let a = p.a();
    let sg = p.sigma();
    let mut sq = C64::new(1.0, 0.0);
    let mut logs = C64::new(0.0, 0.0);
    let mut ex = C64::new(0.0, 0.0);
    for tr in &set.trajectories {
        let (x0, x1) = (tr.initial(), tr.last());
        sq *= (x1.chart() / x0.chart()).sqrt();
        logs += (x0.chart() / (1.0 + sg)).ln();
        ex += -0.5 * (a - x0.ua * x0.va);
    }
    sq * (p.j * logs).exp() * ex.exp()
}

/// General amplitude; the root of `det R` nearest `hint` is used.
pub fn amplitude(set: &TrajectorySet, p: &ExampleParams, hint: Option<C64>) -> Result<C64> {
    let det = matrix_r(&set.tangents()).determinant();
    if det.norm() < 1e-13 {
        return Err(Error::Caustic { det: det.norm() });
    }
    Ok(amplitude_prefactor(set, p) / sqrt_near(det, hint))
}

/// Closed form of [`amplitude_prefactor`] for the example:
/// `[(1 + beta sigma)(beta + sigma) / (beta (1 + sigma)^2)]^{2j}
///  exp(|z0|^2 ((alpha^2 + 1)/alpha - 2))`.
pub fn closed_prefactor(alpha1: C64, p: &ExampleParams, tau: f64) -> Result<C64> {
    let b = f_z(alpha1, p, tau)?;
    let sg = p.sigma();
    let base = (1.0 + b * sg) * (b + sg) / (b * (1.0 + sg) * (1.0 + sg));
    Ok(cpowi(base, p.two_j()) * (p.a() * ((alpha1 * alpha1 + 1.0) / alpha1 - 2.0)).exp())
}

pub fn amplitude_closed(alpha1: C64, p: &ExampleParams, tau: f64, sqrt_det_r: C64) -> Result<C64> {
    Ok(closed_prefactor(alpha1, p, tau)? / sqrt_det_r)
}

/// `g_z(x) = -i lambda |z0|^2 (x^2 - 1) T / (j x)`.
pub fn g_z(x: C64, p: &ExampleParams, tau: f64) -> C64 {
    -I * p.lambda * p.a() * (x * x - 1.0) * p.time(tau) / (p.j * x)
}

/// `g_s(x) = -2 i lambda |s0|^2 (x^2 - 1) T / ((1 + |s0|^2 x)(x + |s0|^2))`.
pub fn g_s(x: C64, p: &ExampleParams, tau: f64) -> C64 {
    let sg = p.sigma();
    -2.0 * I * p.lambda * sg * (x * x - 1.0) * p.time(tau) / ((1.0 + sg * x) * (x + sg))
}

/// Closed-form `(i/hbar)(F1 - F2 + F3 - F4)`; zero at `tau = 0`.
pub fn phase_closed(alpha1: C64, p: &ExampleParams, tau: f64) -> Result<C64> {
    let t = p.time(tau);
    if t == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let b = f_z(alpha1, p, tau)?;
    Ok(-(I * p.j / (p.lambda * t)) * g_z(alpha1, p, tau) * g_s(b, p, tau))
}

/// `(i/hbar) F` of one trajectory by Simpson quadrature.
pub fn phase_single(traj: &Trajectory, model: &dyn HamiltonianModel) -> Result<C64> {
    if traj.duration() == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let j = model.j();
    let hb = model.hbar();
    let vals = traj
        .states
        .iter()
        .map(|x| {
            let d = eom(x, model)?;
            let jac = eom_jacobian(x, model);
            let al_a = d.va * x.ua - x.va * d.ua;
            let al_b = d.vb * x.ub - x.vb * d.ub;
            let be_a = jac[2][2] - jac[0][0];
            let be_b = jac[3][3] - jac[1][1];
            Ok(0.5 * (al_a + 2.0 * j * al_b / x.chart()) + 0.25 * (be_a + be_b) - I / hb * model.value(x))
        })
        .collect::<Result<Vec<_>>>()?;
    simpson(&vals, traj.times[1] - traj.times[0])
}

/// General `(i/hbar)(F1 - F2 + F3 - F4)` from quadrature along the set.
pub fn phase_exponent(set: &TrajectorySet, model: &dyn HamiltonianModel) -> Result<C64> {
    let f: Vec<C64> = set.trajectories.iter().map(|t| phase_single(t, model)).collect::<Result<_>>()?;
    Ok(f[0] - f[1] + f[2] - f[3])
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Contribution {
    pub alpha1: C64,
    pub amplitude: C64,
    pub phase_exponent: C64,
    pub value: C64,
    pub family_id: usize,
    pub admitted: bool,
}

pub fn contribution(alpha1: C64, p: &ExampleParams, tau: f64, sqrt_det_r: C64, family_id: usize) -> Contribution {
    let amp = amplitude_closed(alpha1, p, tau, sqrt_det_r).unwrap_or(C64::new(f64::NAN, f64::NAN));
    let ph = phase_closed(alpha1, p, tau).unwrap_or(C64::new(f64::NAN, f64::NAN));
    Contribution { alpha1, amplitude: amp, phase_exponent: ph, value: amp * ph.exp(), family_id, admitted: false }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissionOptions {
    pub cap: f64,
    pub purity_low: f64,
    pub purity_high: f64,
}

impl Default for AdmissionOptions {
    fn default() -> Self {
        AdmissionOptions { cap: 1.0 + 1e-6, purity_low: -1e-3, purity_high: 1.0 + 1e-3 }
    }
}

/// Marks each contribution admitted when finite and within the cap.
pub fn filter_contributions(contribs: &mut [Contribution], cap: f64) -> usize {
    let mut n = 0;
    for c in contribs.iter_mut() {
        c.admitted = c.value.is_finite() && c.value.norm() <= cap;
        n += c.admitted as usize;
    }
    n
}

/// Which families enter a semiclassical curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    /// Only the family of `alpha1 = 1`.
    Real,
    /// Every family of structures `1..=k`.
    Upto(usize),
}

impl Level {
    pub fn name(&self) -> String {
        match self {
            Level::Real => "real".into(),
            Level::Upto(k) => format!("st{k}"),
        }
    }

    pub fn includes(&self, fam: &RootFamily) -> bool {
        match self {
            Level::Real => is_real_family(fam),
            Level::Upto(k) => fam.structure_id.is_some_and(|s| s <= *k),
        }
    }
}

pub fn is_real_family(fam: &RootFamily) -> bool {
    (fam.seed - 1.0).norm() < 1e-9
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScEntropy {
    pub value: f64,
    pub im_residue: f64,
    pub purity: C64,
    pub n_admitted: usize,
    pub contributions: Vec<Contribution>,
}

/// `1 - sum` of admitted contributions at one grid point. Families are
/// visited in id order; the real family is always admitted, other terms
/// need a finite value within the cap, and a family is dropped whole when
/// it would move the running purity out of its window.
pub fn semiclassical_entropy(p: &ExampleParams, tau: f64, families: &[RootFamily], level: Level, opts: &AdmissionOptions) -> ScEntropy {
    let mut purity = C64::new(0.0, 0.0);
    let mut all = Vec::new();
    let mut n_admitted = 0;
    for fam in families.iter().filter(|f| level.includes(f)) {
        let Some(gi) = fam.at(tau) else { continue };
        let ps = partners4(fam.roots[gi].alpha1);
        let keep = distinct_mask(&ps);
        let mut cs: Vec<Contribution> =
            (0..4).filter(|k| keep[*k]).map(|k| contribution(ps[k], p, tau, fam.sqrt_det[gi][k], fam.id)).collect();
        let real = is_real_family(fam);
        if real {
            for c in cs.iter_mut() {
                c.admitted = c.value.is_finite();
            }
        } else {
            filter_contributions(&mut cs, opts.cap);
        }
        let add: C64 = cs.iter().filter(|c| c.admitted).map(|c| c.value).sum();
        let next = purity + add;
        if !real && (next.re > opts.purity_high || next.re < opts.purity_low) {
            for c in cs.iter_mut() {
                c.admitted = false;
            }
        } else {
            purity = next;
        }
        n_admitted += cs.iter().filter(|c| c.admitted).count();
        all.extend(cs);
    }
    ScEntropy { value: 1.0 - purity.re, im_residue: purity.im.abs(), purity, n_admitted, contributions: all }
}
