//! Roots of `f(a) = f_s(f_z(a)) - a` in the complex plane: zero-contour
//! scanning, Newton polishing, the four-fold symmetry, continuation in
//! `tau` and grouping into structures.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::example_model::ExampleParams;
use crate::propagator::sqrt_near;
use crate::{Error, Result, C64, I};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRegion {
    pub rmin: f64,
    pub rmax: f64,
    pub upper_half: bool,
    pub grid_nr: usize,
    pub grid_ntheta: usize,
}

impl Default for ScanRegion {
    fn default() -> Self {
        ScanRegion { rmin: 0.02, rmax: 1.0, upper_half: true, grid_nr: 400, grid_ntheta: 400 }
    }
}

impl ScanRegion {
    pub fn validate(&self) -> Result<()> {
        if !(self.rmin > 0.0 && self.rmin < self.rmax) {
            return Err(Error::InvalidParameter("scan radii must satisfy 0 < rmin < rmax".into()));
        }
        if self.grid_nr < 64 || self.grid_ntheta < 64 {
            return Err(Error::InvalidParameter("scan grid must be at least 64 x 64".into()));
        }
        Ok(())
    }

    fn contains(&self, a: C64) -> bool {
        let r = a.norm();
        r <= self.rmax + 1e-9 && r >= self.rmin * (1.0 - 1e-9) && (!self.upper_half || a.im >= -1e-12)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub alpha1: C64,
    pub tau: f64,
    pub residual: f64,
    pub structure_id: Option<usize>,
}

pub fn f_z(x: C64, p: &ExampleParams, tau: f64) -> Result<C64> {
    if x == C64::new(0.0, 0.0) {
        return Err(Error::Pole("f_z at x = 0".into()));
    }
    Ok((-2.0 * PI * I * tau * p.a() * (x - 1.0 / x)).exp())
}

pub fn f_s(x: C64, p: &ExampleParams, tau: f64) -> Result<C64> {
    let sg = p.sigma();
    if sg == 0.0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let den = (1.0 + sg * x) * (x + sg);
    if den == C64::new(0.0, 0.0) {
        return Err(Error::Pole("f_s at -|s0|^2 or -1/|s0|^2".into()));
    }
    let t = p.time(tau);
    Ok((-2.0 * I * p.lambda * sg * (x * x - 1.0) * t / den).exp())
}

pub fn f_transcendental(alpha1: C64, p: &ExampleParams, tau: f64) -> Result<C64> {
    Ok(f_s(f_z(alpha1, p, tau)?, p, tau)? - alpha1)
}

fn f_or_nan(a: C64, p: &ExampleParams, tau: f64) -> C64 {
    match f_transcendental(a, p, tau) {
        Ok(v) if v.is_finite() => v,
        _ => C64::new(f64::NAN, f64::NAN),
    }
}

/// Distance from the pole set of `f`: `a = 0` and the preimages of the
/// poles of `f_s` under `f_z`.
pub fn pole_distance(a: C64, p: &ExampleParams, tau: f64) -> f64 {
    let Ok(b) = f_z(a, p, tau) else { return 0.0 };
    let sg = p.sigma();
    let mut d = a.norm();
    if sg > 0.0 {
        d = d.min((b + sg).norm()).min((b + 1.0 / sg).norm());
    }
    d
}

/// Cell centres of a polar grid where both `Re f` and `Im f` change sign.
/// The grid is padded by one cell on each side so that roots lying on the
/// region boundary (the real axis, the unit circle) are bracketed.
pub fn scan(region: &ScanRegion, p: &ExampleParams, tau: f64) -> Vec<C64> {
    let nr = region.grid_nr;
    let nt = region.grid_ntheta;
    let dr = (region.rmax - region.rmin) / (nr - 1) as f64;
    let span = if region.upper_half { PI } else { 2.0 * PI };
    let dt = span / (nt - 1) as f64;
    let rs: Vec<f64> = (0..nr + 2).map(|k| region.rmin - dr + k as f64 * dr).collect();
    let ts: Vec<f64> = (0..nt + 2).map(|k| -dt + k as f64 * dt).collect();
    let row = |i: usize| -> Vec<C64> { ts.iter().map(|t| f_or_nan(C64::from_polar(rs[i].max(1e-12), *t), p, tau)).collect() };
    let grid: Vec<Vec<C64>> = par_map((0..rs.len()).collect(), row);
    let mut out = Vec::new();
    for i in 0..rs.len() - 1 {
        for k in 0..ts.len() - 1 {
            let c = [grid[i][k], grid[i + 1][k], grid[i][k + 1], grid[i + 1][k + 1]];
            if c.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let (mut rlo, mut rhi, mut ilo, mut ihi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for v in c {
                rlo = rlo.min(v.re);
                rhi = rhi.max(v.re);
                ilo = ilo.min(v.im);
                ihi = ihi.max(v.im);
            }
            if rlo < 0.0 && rhi > 0.0 && ilo < 0.0 && ihi > 0.0 {
                out.push(C64::from_polar(0.5 * (rs[i] + rs[i + 1]), 0.5 * (ts[k] + ts[k + 1])));
            }
        }
    }
    out
}

fn derivative(a: C64, p: &ExampleParams, tau: f64) -> Result<C64> {
    let h = 1e-7;
    Ok((f_transcendental(a + h, p, tau)? - f_transcendental(a - h, p, tau)?) / (2.0 * h))
}

/// Complex Newton with a central-difference derivative. Converged roots get
/// up to two extra polishing steps and the best iterate is kept.
pub fn refine(candidate: C64, p: &ExampleParams, tau: f64) -> Result<Root> {
    newton(candidate, p, tau, 50)
}

fn newton(candidate: C64, p: &ExampleParams, tau: f64, max_iter: usize) -> Result<Root> {
    let fail = || Error::NonConvergence(format!("{candidate}"));
    let mut x = candidate;
    let mut best = (x, f64::INFINITY);
    let mut polish = 0;
    for _ in 0..=max_iter {
        let fx = f_transcendental(x, p, tau).map_err(|_| fail())?;
        let r = fx.norm();
        if !r.is_finite() {
            return Err(fail());
        }
        if r < best.1 {
            best = (x, r);
        }
        if best.1 < 1e-12 {
            polish += 1;
            if polish > 2 || r == 0.0 {
                break;
            }
        }
        let d = derivative(x, p, tau).map_err(|_| fail())?;
        if !d.is_finite() || d.norm() == 0.0 {
            break;
        }
        x -= fx / d;
    }
    let (x, r) = best;
    if r >= 1e-12 || pole_distance(x, p, tau) < 1e-6 {
        return Err(fail());
    }
    Ok(Root { alpha1: x, tau, residual: r, structure_id: None })
}

/// The orbit `{r, conj r, 1/r, 1/conj r}` in that fixed order.
pub fn partners4(r: C64) -> [C64; 4] {
    [r, r.conj(), 1.0 / r, 1.0 / r.conj()]
}

/// Which entries of [`partners4`] are distinct from the earlier ones.
pub fn distinct_mask(ps: &[C64; 4]) -> [bool; 4] {
    let mut keep = [true; 4];
    for k in 1..4 {
        keep[k] = (0..k).all(|m| !keep[m] || (ps[k] - ps[m]).norm() > 1e-8);
    }
    keep
}

/// The deduplicated symmetry orbit of a root, each member re-verified.
pub fn expand_symmetry(root: &Root, p: &ExampleParams) -> Result<Vec<C64>> {
    let ps = partners4(root.alpha1);
    let keep = distinct_mask(&ps);
    let mut out = Vec::new();
    for k in 0..4 {
        if !keep[k] {
            continue;
        }
        let res = f_transcendental(ps[k], p, root.tau)?.norm();
        if !(res < 1e-10) {
            return Err(Error::SymmetryViolation { point: format!("{}", ps[k]), residual: res });
        }
        out.push(ps[k]);
    }
    Ok(out)
}

/// Maps a root to its orbit member with `|a| <= 1` and `Im a >= 0`.
pub fn representative(a: C64) -> C64 {
    let mut r = if a.norm() > 1.0 { 1.0 / a } else { a };
    if r.im < 0.0 {
        r = r.conj();
    }
    r
}

fn sort_key(a: C64) -> (i64, i64) {
    (((a - 1.0).norm() * 1e12) as i64, (a.arg() * 1e12) as i64)
}

/// Scans, refines and deduplicates (tolerance 1e-8) all roots in the region,
/// each labelled with its structure.
pub fn find_roots(region: &ScanRegion, p: &ExampleParams, tau: f64) -> Vec<Root> {
    let cands = scan(region, p, tau);
    let refined: Vec<Option<Root>> = par_map(cands, |c| refine(c, p, tau).ok());
    let mut roots: Vec<Root> = Vec::new();
    for mut r in refined.into_iter().flatten() {
        if region.upper_half && r.alpha1.im < 0.0 && r.alpha1.im > -1e-12 {
            r.alpha1 = r.alpha1.conj();
        }
        if !region.contains(r.alpha1) {
            continue;
        }
        if roots.iter().all(|q| (q.alpha1 - r.alpha1).norm() > 1e-8) {
            roots.push(r);
        }
    }
    let alphas: Vec<C64> = roots.iter().map(|r| r.alpha1).collect();
    let ids = cluster_structures(&alphas, p, tau);
    for (r, s) in roots.iter_mut().zip(ids) {
        r.structure_id = s;
    }
    roots.sort_by(|a, b| {
        let ka = (a.structure_id.unwrap_or(usize::MAX), sort_key(a.alpha1));
        let kb = (b.structure_id.unwrap_or(usize::MAX), sort_key(b.alpha1));
        ka.cmp(&kb)
    });
    roots
}

/// Structure labels. With `w = tau |z0|^2 (a - 1/a)` taken on the orbit
/// representative, a root belongs to structure `round(-Re w) + 1` when it
/// lies in the right half plane and `f_z(a)` lies in the right half plane;
/// the remaining roots (the accumulations around the essential
/// singularities of `f`) get `None`. Labels grow with distance from `a = 1`.
pub fn cluster_structures(roots: &[C64], p: &ExampleParams, tau: f64) -> Vec<Option<usize>> {
    roots
        .iter()
        .map(|a| {
            let r = representative(*a);
            if r.re <= 0.0 {
                return None;
            }
            let beta = f_z(r, p, tau).ok()?;
            if beta.re <= 0.0 {
                return None;
            }
            let w = tau * p.a() * (r - 1.0 / r);
            let k = (-w.re).round();
            if k < 0.0 {
                return None;
            }
            Some(k as usize + 1)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyOptions {
    /// Largest continuation step in `tau`.
    pub substep: f64,
    /// Largest accepted move of the root between substeps.
    pub max_jump: f64,
    /// Distance below which two families are considered collided.
    pub collision: f64,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions { substep: 1e-3, max_jump: 0.05, collision: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    /// Newton failed or jumped; carries the last good `tau`.
    Lost { last_tau: f64 },
    /// Merged into the family with this id.
    Collision { partner: usize, tau: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RootFamily {
    pub id: usize,
    pub structure_id: Option<usize>,
    /// The root as detected at `ref_tau`.
    pub seed: C64,
    pub ref_tau: f64,
    /// Smallest and largest `tau` reached.
    pub birth_tau: f64,
    pub death_tau: f64,
    /// Grid points covered, ascending.
    pub taus: Vec<f64>,
    pub roots: Vec<Root>,
    /// `sqrt(det R)` for each member of [`partners4`] at each grid point,
    /// continued from the principal branch at the birth point.
    pub sqrt_det: Vec<[C64; 4]>,
    /// Branch anchor at the last continued point.
    pub branch_state: [C64; 4],
    pub ends: Vec<Termination>,
}

impl RootFamily {
    pub fn at(&self, tau: f64) -> Option<usize> {
        self.taus.iter().position(|t| (t - tau).abs() < 1e-12)
    }
}

struct Walk {
    dense: Vec<(f64, C64)>,
    grid: Vec<(f64, Root)>,
    end: Option<Termination>,
}

fn walk(seed: C64, t0: f64, targets: &[f64], p: &ExampleParams, o: &FamilyOptions) -> Walk {
    let mut dense = Vec::new();
    let mut grid = Vec::new();
    let mut hist: Vec<(f64, C64)> = vec![(t0, seed)];
    let mut t = t0;
    let mut x = seed;
    for &target in targets {
        let n = (((target - t).abs() / o.substep).ceil() as usize).max(1);
        let from = t;
        let mut last = None;
        for k in 1..=n {
            let ts = if k == n { target } else { from + (target - from) * k as f64 / n as f64 };
            let guess = match hist.len() {
                0 | 1 => x,
                len => {
                    let (ta, xa) = hist[len - 2];
                    let (tb, xb) = hist[len - 1];
                    if (tb - ta).abs() > 0.0 { xb + (xb - xa) * ((ts - tb) / (tb - ta)) } else { xb }
                }
            };
            let got = newton(guess, p, ts, 50).ok().filter(|r| (r.alpha1 - x).norm() <= o.max_jump);
            match got {
                Some(r) => {
                    x = r.alpha1;
                    t = ts;
                    hist.push((ts, x));
                    if hist.len() > 2 {
                        hist.remove(0);
                    }
                    dense.push((ts, x));
                    last = Some(r);
                }
                None => {
                    return Walk { dense, grid, end: Some(Termination::Lost { last_tau: t }) };
                }
            }
        }
        if let Some(mut r) = last {
            r.tau = target;
            grid.push((target, r));
        }
    }
    Walk { dense, grid, end: None }
}

/// Continues a root from `ref_tau` over `tau_grid` in both directions.
/// `det_r` evaluates `det R` for a trajectory set; it drives the branch of
/// `sqrt(det R)`, followed along every substep.
pub fn continue_family<F>(
    root: &Root,
    tau_grid: &[f64],
    p: &ExampleParams,
    o: &FamilyOptions,
    det_r: F,
) -> RootFamily
where
    F: Fn(C64, f64) -> Option<C64>,
{
    let t0 = root.tau;
    let mut up: Vec<f64> = tau_grid.iter().copied().filter(|t| *t > t0 + 1e-12).collect();
    let mut down: Vec<f64> = tau_grid.iter().copied().filter(|t| *t < t0 - 1e-12).collect();
    up.sort_by(|a, b| a.partial_cmp(b).unwrap());
    down.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let wu = walk(root.alpha1, t0, &up, p, o);
    let wd = walk(root.alpha1, t0, &down, p, o);

    let mut grid: Vec<(f64, Root)> = wd.grid.into_iter().rev().collect();
    if tau_grid.iter().any(|t| (t - t0).abs() <= 1e-12) {
        grid.push((t0, *root));
    }
    grid.extend(wu.grid);

    let mut dense: Vec<(f64, C64)> = wd.dense.into_iter().rev().collect();
    dense.push((t0, root.alpha1));
    dense.extend(wu.dense);

    let birth_tau = dense.first().map(|d| d.0).unwrap_or(t0);
    let death_tau = dense.last().map(|d| d.0).unwrap_or(t0);

    // branch pass from the birth point upward
    let mut state: [C64; 4] = [C64::new(0.0, 0.0); 4];
    let mut started = false;
    let mut sqrt_det = Vec::with_capacity(grid.len());
    let mut gi = 0;
    for (t, a) in &dense {
        let ps = partners4(*a);
        for k in 0..4 {
            if let Some(d) = det_r(ps[k], *t) {
                state[k] = sqrt_near(d, if started { Some(state[k]) } else { None });
            }
        }
        started = true;
        while gi < grid.len() && (grid[gi].0 - t).abs() <= 1e-12 {
            sqrt_det.push(state);
            gi += 1;
        }
    }
    let mut ends = Vec::new();
    ends.extend(wd.end);
    ends.extend(wu.end);
    RootFamily {
        id: 0,
        structure_id: root.structure_id,
        seed: root.alpha1,
        ref_tau: t0,
        birth_tau,
        death_tau,
        taus: grid.iter().map(|g| g.0).collect(),
        roots: grid.into_iter().map(|g| g.1).collect(),
        sqrt_det,
        branch_state: state,
        ends,
    }
}

/// Continues every root, orders the families (structure, then birth, then
/// distance from `a = 1`), assigns ids, and cuts a family at the first grid
/// point, going outward from `ref_tau`, where its orbit meets the orbit of
/// an earlier family.
pub fn continue_families<F>(
    roots: &[Root],
    tau_grid: &[f64],
    p: &ExampleParams,
    o: &FamilyOptions,
    det_r: F,
) -> Vec<RootFamily>
where
    F: Fn(C64, f64) -> Option<C64> + Sync,
{
    let mut fams: Vec<RootFamily> = par_map(roots.to_vec(), |r| continue_family(&r, tau_grid, p, o, &det_r));
    fams.sort_by(|a, b| {
        let ka = (a.structure_id.unwrap_or(usize::MAX), (a.birth_tau * 1e9).round() as i64, sort_key(a.seed));
        let kb = (b.structure_id.unwrap_or(usize::MAX), (b.birth_tau * 1e9).round() as i64, sort_key(b.seed));
        ka.cmp(&kb)
    });
    for (k, f) in fams.iter_mut().enumerate() {
        f.id = k;
    }
    for k in 1..fams.len() {
        let (done, rest) = fams.split_at_mut(k);
        let fam = &mut rest[0];
        let mut cut: Vec<(usize, usize)> = Vec::new();
        for (gi, t) in fam.taus.iter().enumerate() {
            let mine = partners4(fam.roots[gi].alpha1);
            for other in done.iter() {
                if let Some(oi) = other.at(*t) {
                    let theirs = partners4(other.roots[oi].alpha1);
                    if mine.iter().any(|a| theirs.iter().any(|b| (a - b).norm() < o.collision)) {
                        cut.push((gi, other.id));
                        break;
                    }
                }
            }
        }
        if cut.is_empty() {
            continue;
        }
        let ref_tau = fam.ref_tau;
        let lo = cut.iter().filter(|(g, _)| fam.taus[*g] <= ref_tau).copied().max_by_key(|c| c.0);
        let hi = cut.iter().filter(|(g, _)| fam.taus[*g] > ref_tau).copied().min_by_key(|c| c.0);
        let start = lo.map(|c| c.0 + 1).unwrap_or(0);
        let stop = hi.map(|c| c.0).unwrap_or(fam.taus.len());
        for (g, partner) in [lo, hi].into_iter().flatten() {
            fam.ends.push(Termination::Collision { partner, tau: fam.taus[g] });
        }
        let stop = stop.max(start);
        fam.taus = fam.taus[start..stop].to_vec();
        fam.roots = fam.roots[start..stop].to_vec();
        fam.sqrt_det = fam.sqrt_det[start..stop].to_vec();
        if let (Some(a), Some(b)) = (fam.taus.first(), fam.taus.last()) {
            fam.birth_tau = fam.birth_tau.max(*a);
            fam.death_tau = fam.death_tau.min(*b);
        }
    }
    fams
}

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Send, U: Send>(items: Vec<T>, f: impl Fn(T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Send, U: Send>(items: Vec<T>, f: impl Fn(T) -> U + Sync + Send) -> Vec<U> {
    items.into_iter().map(f).collect()
}
