//! Command-line driver: run configuration, the `exact`, `roots`, `sweep`
//! and `plotscript` commands, and their CSV/JSON writers.
//!
//! The computations are exposed as plain functions returning rows so that
//! other front ends can reuse them without touching the file system.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::entanglement::{
    det_r_example, exact_entropy, oracle_entropy, resolve_nmax, semiclassical_entropy, AdmissionOptions, Level, Traced,
};
use crate::example_model::ExampleParams;
use crate::propagator::poisson_tail;
use crate::rootfinder::{continue_families, find_roots, FamilyOptions, Root, RootFamily, ScanRegion, Termination};
use crate::{Error, Result, C64};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Tolerance between the quadruple sum and the dense oracle.
pub const EXACT_TOL: f64 = 1e-10;
/// Pointwise tolerance defining the agreement window.
pub const WINDOW_TOL: f64 = 0.05;
/// Largest acceptable imaginary residue of a semiclassical sum.
pub const IM_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ExampleParams,
    pub tau_start: f64,
    pub tau_stop: f64,
    pub tau_count: usize,
    /// `None` picks the smallest truncation with Poisson tail below 1e-14.
    pub nmax: Option<usize>,
    pub scan: ScanRegion,
    /// Where roots are detected before continuation.
    pub tau_ref: f64,
    pub structure_count: usize,
    pub admission: AdmissionOptions,
    pub family: FamilyOptions,
    pub exact_csv: PathBuf,
    pub atlas_csv: PathBuf,
    pub curves_csv: PathBuf,
    pub report_json: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ExampleParams::default(),
            tau_start: 0.0,
            tau_stop: 1.0,
            tau_count: 500,
            nmax: None,
            scan: ScanRegion::default(),
            tau_ref: 0.5,
            structure_count: 5,
            admission: AdmissionOptions::default(),
            family: FamilyOptions::default(),
            exact_csv: "exact.csv".into(),
            atlas_csv: "atlas.csv".into(),
            curves_csv: "curves.csv".into(),
            report_json: "report.json".into(),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: expected a number, got '{v}'")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| Error::Config(format!("{key}: expected a count, got '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn parse_complex(key: &str, v: &str) -> Result<C64> {
    let mut it = v.split(',');
    match (it.next(), it.next(), it.next()) {
        (Some(re), Some(im), None) => Ok(C64::new(parse_f64(key, re)?, parse_f64(key, im)?)),
        (Some(re), None, None) => Ok(C64::new(parse_f64(key, re)?, 0.0)),
        _ => Err(Error::Config(format!("{key}: expected 're,im', got '{v}'"))),
    }
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "lambda" => self.params.lambda = parse_f64(key, v)?,
            "j" => self.params.j = parse_f64(key, v)?,
            "z0" => self.params.z0 = parse_complex(key, v)?,
            "s0" => self.params.s0 = parse_complex(key, v)?,
            "hbar" => self.params.hbar = parse_f64(key, v)?,
            "tau_start" => self.tau_start = parse_f64(key, v)?,
            "tau_stop" => self.tau_stop = parse_f64(key, v)?,
            "tau_count" => self.tau_count = parse_usize(key, v)?,
            "nmax" => self.nmax = if v == "auto" { None } else { Some(parse_usize(key, v)?) },
            "scan_rmin" => self.scan.rmin = parse_f64(key, v)?,
            "scan_rmax" => self.scan.rmax = parse_f64(key, v)?,
            "scan_upper_half" => self.scan.upper_half = parse_bool(key, v)?,
            "scan_grid_nr" => self.scan.grid_nr = parse_usize(key, v)?,
            "scan_grid_ntheta" => self.scan.grid_ntheta = parse_usize(key, v)?,
            "tau_ref" => self.tau_ref = parse_f64(key, v)?,
            "structure_count" => self.structure_count = parse_usize(key, v)?,
            "admission_cap" => self.admission.cap = parse_f64(key, v)?,
            "purity_low" => self.admission.purity_low = parse_f64(key, v)?,
            "purity_high" => self.admission.purity_high = parse_f64(key, v)?,
            "family_substep" => self.family.substep = parse_f64(key, v)?,
            "family_max_jump" => self.family.max_jump = parse_f64(key, v)?,
            "family_collision" => self.family.collision = parse_f64(key, v)?,
            "exact_csv" => self.exact_csv = v.into(),
            "atlas_csv" => self.atlas_csv = v.into(),
            "curves_csv" => self.curves_csv = v.into(),
            "report_json" => self.report_json = v.into(),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let c = |z: C64| format!("{},{}", z.re, z.im);
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("lambda", self.params.lambda.to_string());
        kv("j", self.params.j.to_string());
        kv("z0", c(self.params.z0));
        kv("s0", c(self.params.s0));
        kv("hbar", self.params.hbar.to_string());
        kv("tau_start", self.tau_start.to_string());
        kv("tau_stop", self.tau_stop.to_string());
        kv("tau_count", self.tau_count.to_string());
        kv("nmax", self.nmax.map_or("auto".into(), |n| n.to_string()));
        kv("scan_rmin", self.scan.rmin.to_string());
        kv("scan_rmax", self.scan.rmax.to_string());
        kv("scan_upper_half", self.scan.upper_half.to_string());
        kv("scan_grid_nr", self.scan.grid_nr.to_string());
        kv("scan_grid_ntheta", self.scan.grid_ntheta.to_string());
        kv("tau_ref", self.tau_ref.to_string());
        kv("structure_count", self.structure_count.to_string());
        kv("admission_cap", self.admission.cap.to_string());
        kv("purity_low", self.admission.purity_low.to_string());
        kv("purity_high", self.admission.purity_high.to_string());
        kv("family_substep", self.family.substep.to_string());
        kv("family_max_jump", self.family.max_jump.to_string());
        kv("family_collision", self.family.collision.to_string());
        kv("exact_csv", self.exact_csv.display().to_string());
        kv("atlas_csv", self.atlas_csv.display().to_string());
        kv("curves_csv", self.curves_csv.display().to_string());
        kv("report_json", self.report_json.display().to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.scan.validate()?;
        if self.tau_count < 2 {
            return Err(Error::InvalidParameter("tau_count must be at least 2".into()));
        }
        if !(self.tau_stop > self.tau_start) || !self.tau_start.is_finite() || !self.tau_stop.is_finite() {
            return Err(Error::InvalidParameter("tau_stop must exceed tau_start".into()));
        }
        if !(self.tau_ref > 0.0) || !self.tau_ref.is_finite() {
            return Err(Error::InvalidParameter("tau_ref must be positive".into()));
        }
        if self.structure_count == 0 {
            return Err(Error::InvalidParameter("structure_count must be at least 1".into()));
        }
        let a = &self.admission;
        if !(a.cap > 0.0) || !(a.purity_low < a.purity_high) {
            return Err(Error::InvalidParameter("admission thresholds out of order".into()));
        }
        let f = &self.family;
        if !(f.substep > 0.0) || !(f.max_jump > 0.0) || !(f.collision > 0.0) {
            return Err(Error::InvalidParameter("family options must be positive".into()));
        }
        Ok(())
    }

    /// `tau_count` uniform points on `[tau_start, tau_stop)`.
    pub fn tau_grid(&self) -> Vec<f64> {
        let h = (self.tau_stop - self.tau_start) / self.tau_count as f64;
        (0..self.tau_count).map(|k| self.tau_start + k as f64 * h).collect()
    }

    /// The Poisson weight dropped by the truncation in use.
    pub fn truncation_tail(&self) -> f64 {
        poisson_tail(self.params.a(), resolve_nmax(&self.params, self.nmax))
    }

    /// `real`, then `st1..st(K-1)`, then the full set.
    pub fn default_levels(&self) -> Vec<Level> {
        let mut v = vec![Level::Real];
        v.extend((1..=self.structure_count).map(Level::Upto));
        v
    }

    /// Column name of a level; the last structure level is `all`.
    pub fn level_name(&self, l: Level) -> String {
        match l {
            Level::Upto(k) if k == self.structure_count => "all".into(),
            _ => l.name(),
        }
    }

    /// Parses `real,st1,...,all`.
    pub fn parse_levels(&self, list: &str) -> Result<Vec<Level>> {
        let mut out = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let l = match item {
                "real" => Level::Real,
                "all" => Level::Upto(self.structure_count),
                s => {
                    let k = s
                        .strip_prefix("st")
                        .and_then(|k| k.parse::<usize>().ok())
                        .filter(|k| *k >= 1 && *k <= self.structure_count)
                        .ok_or_else(|| Error::Config(format!("unknown level '{s}'")))?;
                    Level::Upto(k)
                }
            };
            if !out.contains(&l) {
                out.push(l);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("empty level list".into()));
        }
        out.sort_by_key(|l| match l {
            Level::Real => 0,
            Level::Upto(k) => *k,
        });
        Ok(out)
    }
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    // folds -0 into 0
    if x == 0.0 {
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactRow {
    pub tau: f64,
    pub quantum: f64,
    pub oracle: f64,
}

impl ExactRow {
    pub fn diff(&self) -> f64 {
        (self.quantum - self.oracle).abs()
    }
}

pub fn exact_rows(cfg: &RunConfig, taus: &[f64]) -> Result<Vec<ExactRow>> {
    let rows = crate::rootfinder::par_map(taus.to_vec(), |t| -> Result<ExactRow> {
        Ok(ExactRow {
            tau: t,
            quantum: exact_entropy(&cfg.params, t, cfg.nmax)?,
            oracle: oracle_entropy(&cfg.params, t, cfg.nmax, Traced::Field)?,
        })
    });
    rows.into_iter().collect()
}

pub fn exact_csv(rows: &[ExactRow]) -> String {
    let mut s = String::from("tau,E_quantum,E_oracle,abs_diff\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", fmt_num(r.tau), fmt_num(r.quantum), fmt_num(r.oracle), fmt_num(r.diff()));
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtlasRow {
    pub root: Root,
    pub family_id: Option<usize>,
}

/// Roots at `tau`, each tagged with the family it seeds when continued over
/// the configured grid.
pub fn atlas_rows(cfg: &RunConfig, tau: f64) -> Result<Vec<AtlasRow>> {
    cfg.params.validate()?;
    cfg.scan.validate()?;
    let roots = find_roots(&cfg.scan, &cfg.params, tau);
    let seeds: Vec<Root> = roots.iter().filter(|r| r.structure_id.is_some()).copied().collect();
    let fams = families_from(cfg, &seeds);
    Ok(roots
        .into_iter()
        .map(|r| {
            let family_id = fams.iter().find(|f| (f.seed - r.alpha1).norm() == 0.0).map(|f| f.id);
            AtlasRow { root: r, family_id }
        })
        .collect())
}

pub fn atlas_csv(rows: &[AtlasRow]) -> String {
    let mut s = String::from("tau,re_alpha1,im_alpha1,residual,structure_id,family_id\n");
    let opt = |x: Option<usize>| x.map_or(String::new(), |v| v.to_string());
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_num(r.root.tau),
            fmt_num(r.root.alpha1.re),
            fmt_num(r.root.alpha1.im),
            fmt_num(r.root.residual),
            opt(r.root.structure_id),
            opt(r.family_id)
        );
    }
    s
}

/// Root count per structure; unstructured roots are counted under `None`.
pub fn structure_counts(rows: &[AtlasRow]) -> BTreeMap<Option<usize>, usize> {
    let mut m = BTreeMap::new();
    for r in rows {
        *m.entry(r.root.structure_id).or_insert(0) += 1;
    }
    m
}

fn families_from(cfg: &RunConfig, seeds: &[Root]) -> Vec<RootFamily> {
    let p = cfg.params;
    continue_families(seeds, &cfg.tau_grid(), &p, &cfg.family, |a, t| det_r_example(a, &p, t))
}

/// Families seeded at `tau_ref` from structures `1..=structure_count`.
pub fn sweep_families(cfg: &RunConfig) -> Result<Vec<RootFamily>> {
    cfg.validate()?;
    let seeds: Vec<Root> = find_roots(&cfg.scan, &cfg.params, cfg.tau_ref)
        .into_iter()
        .filter(|r| r.structure_id.is_some_and(|s| s <= cfg.structure_count))
        .collect();
    Ok(families_from(cfg, &seeds))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub tau: f64,
    pub quantum: f64,
    /// One value per requested level.
    pub sc: Vec<f64>,
    /// Imaginary residue and admitted count of the highest level.
    pub im_residue: f64,
    pub n_admitted: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FamilySummary {
    pub id: usize,
    pub structure: Option<usize>,
    pub birth_tau: f64,
    pub death_tau: f64,
    pub seed: [f64; 2],
    pub ends: Vec<Termination>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SweepReport {
    pub levels: Vec<String>,
    pub rms_error: BTreeMap<String, f64>,
    /// Largest grid `tau` up to which every point agrees within 0.05.
    pub agreement_window: BTreeMap<String, Option<f64>>,
    pub max_im_residue: f64,
    pub families: Vec<FamilySummary>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Sweep {
    pub level_names: Vec<String>,
    pub rows: Vec<CurveRow>,
    pub report: SweepReport,
}

/// Evaluates the exact and semiclassical curves on the grid.
pub fn sweep(cfg: &RunConfig, levels: &[Level]) -> Result<Sweep> {
    let fams = sweep_families(cfg)?;
    let names: Vec<String> = levels.iter().map(|l| cfg.level_name(*l)).collect();
    let rows: Vec<Result<CurveRow>> = crate::rootfinder::par_map(cfg.tau_grid(), |t| {
        let quantum = exact_entropy(&cfg.params, t, cfg.nmax)?;
        let evals: Vec<_> =
            levels.iter().map(|l| semiclassical_entropy(&cfg.params, t, &fams, *l, &cfg.admission)).collect();
        let top = evals.last().expect("at least one level");
        Ok(CurveRow {
            tau: t,
            quantum,
            sc: evals.iter().map(|e| e.value).collect(),
            im_residue: top.im_residue,
            n_admitted: top.n_admitted,
        })
    });
    let rows: Vec<CurveRow> = rows.into_iter().collect::<Result<_>>()?;
    let mut rms_error = BTreeMap::new();
    let mut agreement_window = BTreeMap::new();
    for (k, name) in names.iter().enumerate() {
        let diffs: Vec<f64> = rows.iter().map(|r| (r.sc[k] - r.quantum).abs()).collect();
        let rms = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
        rms_error.insert(name.clone(), rms);
        let ok = diffs.iter().take_while(|d| **d < WINDOW_TOL).count();
        agreement_window.insert(name.clone(), if ok == 0 { None } else { Some(rows[ok - 1].tau) });
    }
    let mut warnings = Vec::new();
    for f in &fams {
        for e in &f.ends {
            match e {
                Termination::Lost { last_tau } => {
                    warnings.push(format!("family {} lost after tau = {last_tau}", f.id));
                }
                Termination::Collision { partner, tau } => {
                    warnings.push(format!("family {} cut at tau = {tau}: meets family {partner}", f.id));
                }
            }
        }
    }
    let families = fams
        .iter()
        .map(|f| FamilySummary {
            id: f.id,
            structure: f.structure_id,
            birth_tau: f.birth_tau,
            death_tau: f.death_tau,
            seed: [f.seed.re, f.seed.im],
            ends: f.ends.clone(),
        })
        .collect();
    let max_im_residue = rows.iter().map(|r| r.im_residue).fold(0.0, f64::max);
    let report = SweepReport { levels: names.clone(), rms_error, agreement_window, max_im_residue, families, warnings };
    Ok(Sweep { level_names: names, rows, report })
}

pub fn curves_csv(s: &Sweep) -> String {
    let mut out = String::from("tau,E_quantum");
    for n in &s.level_names {
        let _ = write!(out, ",E_sc_{n}");
    }
    out.push_str(",im_residue,n_admitted\n");
    for r in &s.rows {
        let _ = write!(out, "{},{}", fmt_num(r.tau), fmt_num(r.quantum));
        for v in &r.sc {
            let _ = write!(out, ",{}", fmt_num(*v));
        }
        let _ = writeln!(out, ",{},{}", fmt_num(r.im_residue), r.n_admitted);
    }
    out
}

pub fn report_json(s: &Sweep) -> String {
    let mut t = serde_json::to_string_pretty(&s.report).expect("report serializes");
    t.push('\n');
    t
}

/// A parsed CSV table: header and rows of optional numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> =
        lines.next().ok_or_else(|| Error::Csv("empty file".into()))?.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Csv(format!("row {}: {} fields, header has {}", n + 1, fields.len(), header.len())));
        }
        let row = fields
            .iter()
            .map(|f| {
                let f = f.trim();
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>().map(Some).map_err(|_| Error::Csv(format!("row {}: bad number '{f}'", n + 1)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn py_list(values: impl Iterator<Item = Option<f64>>) -> String {
    let items: Vec<String> = values.map(|v| v.map_or("None".into(), |x| format!("{x:?}"))).collect();
    format!("[{}]", items.join(", "))
}

fn column(t: &Table, name: &str) -> Option<usize> {
    t.header.iter().position(|h| h == name)
}

/// A matplotlib script with the table's data embedded: curve panels for a
/// curves CSV, an `alpha1`-plane scatter with the unit circle for an atlas.
pub fn plot_script(t: &Table) -> Result<String> {
    let mut s = String::from("import math\nimport matplotlib.pyplot as plt\n\n");
    if let (Some(re), Some(im), Some(st)) = (column(t, "re_alpha1"), column(t, "im_alpha1"), column(t, "structure_id")) {
        let _ = writeln!(s, "re = {}", py_list(t.rows.iter().map(|r| r[re])));
        let _ = writeln!(s, "im = {}", py_list(t.rows.iter().map(|r| r[im])));
        let _ = writeln!(s, "structure = {}", py_list(t.rows.iter().map(|r| r[st])));
        s.push_str(
            "\nfig, ax = plt.subplots(figsize=(6, 6))\n\
             th = [2 * math.pi * k / 400 for k in range(401)]\n\
             ax.plot([math.cos(x) for x in th], [math.sin(x) for x in th], color=\"0.6\", lw=0.8)\n\
             groups = sorted({s for s in structure if s is not None})\n\
             for g in groups:\n\
             \x20   idx = [k for k, s in enumerate(structure) if s == g]\n\
             \x20   ax.scatter([re[k] for k in idx], [im[k] for k in idx], s=12, label=\"St%d\" % g)\n\
             rest = [k for k, s in enumerate(structure) if s is None]\n\
             if rest:\n\
             \x20   ax.scatter([re[k] for k in rest], [im[k] for k in rest], s=4, color=\"0.7\", label=\"other\")\n\
             ax.set_aspect(\"equal\")\n\
             ax.set_xlabel(\"Re alpha1\")\n\
             ax.set_ylabel(\"Im alpha1\")\n\
             ax.legend(fontsize=8)\n\
             fig.tight_layout()\n\
             plt.show()\n",
        );
        return Ok(s);
    }
    let (Some(tau), Some(eq)) = (column(t, "tau"), column(t, "E_quantum")) else {
        return Err(Error::Csv("header has neither curve nor atlas columns".into()));
    };
    let levels: Vec<(usize, String)> = t
        .header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("E_sc_"))
        .map(|(k, h)| (k, h.clone()))
        .collect();
    if levels.is_empty() {
        return Err(Error::Csv("no E_sc_ columns".into()));
    }
    let _ = writeln!(s, "tau = {}", py_list(t.rows.iter().map(|r| r[tau])));
    let _ = writeln!(s, "exact = {}", py_list(t.rows.iter().map(|r| r[eq])));
    s.push_str("levels = [\n");
    for (k, n) in &levels {
        let _ = writeln!(s, "    ({n:?}, {}),", py_list(t.rows.iter().map(|r| r[*k])));
    }
    s.push_str("]\n");
    s.push_str(
        "\nfig, axes = plt.subplots(len(levels), 1, figsize=(6, 2.2 * len(levels)), sharex=True, squeeze=False)\n\
         prev = None\n\
         for ax, (name, vals) in zip(axes[:, 0], levels):\n\
         \x20   ax.plot(tau, exact, color=\"tab:blue\", lw=1.2, label=\"exact\")\n\
         \x20   if prev is not None:\n\
         \x20       ax.plot(tau, prev, color=\"0.6\", lw=0.8, ls=\":\", label=\"previous\")\n\
         \x20   ax.plot(tau, vals, color=\"black\", lw=1.0, ls=\"--\", label=name[len(\"E_sc_\"):])\n\
         \x20   ax.set_ylim(-0.05, 1.05)\n\
         \x20   ax.set_ylabel(\"E\")\n\
         \x20   ax.legend(fontsize=7, loc=\"upper right\")\n\
         \x20   prev = vals\n\
         axes[-1, 0].set_xlabel(\"tau\")\n\
         fig.tight_layout()\n\
         plt.show()\n",
    );
    Ok(s)
}

#[derive(Parser, Debug)]
#[command(name = "sce", about = "Exact and semiclassical entanglement dynamics of a spin-boson example")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, as key=value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Shortcut for --set j=VALUE.
    #[arg(long, global = true)]
    pub j: Option<String>,
    /// Escalate warnings and failed numerical checks to exit code 3.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Output path of the command's main file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Quadruple-sum entropy against the dense oracle.
    Exact {
        #[arg(long)]
        tau: Option<f64>,
        /// Evaluate one point only (at --tau, default tau_start).
        #[arg(long)]
        single: bool,
    },
    /// Root atlas of the transcendental equation at one tau.
    Roots {
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Semiclassical curves per inclusion level with a JSON report.
    Sweep {
        /// Comma-separated list from real, st1, ..., all.
        #[arg(long)]
        levels: Option<String>,
    },
    /// Emit a matplotlib script for a curves or atlas CSV.
    Plotscript { csv: PathBuf },
}

/// Outcome of one command: exit code and what it printed.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub lines: Vec<String>,
    pub written: Vec<PathBuf>,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn config_from(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k, v)?;
    }
    if let Some(j) = &cli.j {
        cfg.set("j", j)?;
    }
    Ok(cfg)
}

pub fn cmd_exact(cfg: &RunConfig, tau: Option<f64>, single: bool, strict: bool, out: Option<&Path>) -> Result<Outcome> {
    cfg.validate()?;
    let taus = if single || tau.is_some() { vec![tau.unwrap_or(cfg.tau_start)] } else { cfg.tau_grid() };
    let rows = exact_rows(cfg, &taus)?;
    let path = out.map_or(cfg.exact_csv.clone(), Path::to_path_buf);
    write_file(&path, &exact_csv(&rows))?;
    let mut o = Outcome { written: vec![path.clone()], ..Default::default() };
    let max_diff = rows.iter().map(ExactRow::diff).fold(0.0, f64::max);
    let sym = taus
        .iter()
        .zip(&rows)
        .map(|(t, r)| exact_entropy(&cfg.params, 1.0 - t, cfg.nmax).map(|e| (e - r.quantum).abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    o.lines.push(format!("wrote {} rows to {}", rows.len(), path.display()));
    o.lines.push(format!("max |E_quantum - E_oracle| = {max_diff:e}"));
    o.lines.push(format!("max |E(tau) - E(1 - tau)| = {sym:e}"));
    if max_diff >= EXACT_TOL {
        o.lines.push(format!("FAIL: oracle disagreement above {EXACT_TOL:e}"));
        o.code = EXIT_NUMERICAL;
    }
    let tail = cfg.truncation_tail();
    if tail > 1e-14 {
        o.lines.push(format!("warning: truncation drops Poisson weight {tail:e}"));
        if strict {
            o.code = EXIT_NUMERICAL;
        }
    }
    if strict && sym >= EXACT_TOL {
        o.code = EXIT_NUMERICAL;
    }
    Ok(o)
}

pub fn cmd_roots(cfg: &RunConfig, tau: Option<f64>, out: Option<&Path>) -> Result<Outcome> {
    cfg.validate()?;
    let tau = tau.unwrap_or(cfg.tau_ref);
    let rows = atlas_rows(cfg, tau)?;
    let path = out.map_or(cfg.atlas_csv.clone(), Path::to_path_buf);
    write_file(&path, &atlas_csv(&rows))?;
    let mut o = Outcome { written: vec![path.clone()], ..Default::default() };
    o.lines.push(format!("wrote {} roots at tau = {tau} to {}", rows.len(), path.display()));
    for (s, n) in structure_counts(&rows) {
        match s {
            Some(s) => o.lines.push(format!("St{s}: {n}")),
            None => o.lines.push(format!("unassigned: {n}")),
        }
    }
    Ok(o)
}

pub fn cmd_sweep(cfg: &RunConfig, levels: Option<&str>, strict: bool, out: Option<&Path>) -> Result<Outcome> {
    cfg.validate()?;
    let levels = match levels {
        Some(l) => cfg.parse_levels(l)?,
        None => cfg.default_levels(),
    };
    let s = sweep(cfg, &levels)?;
    let (csv, json) = match out {
        Some(p) => (p.to_path_buf(), p.with_extension("json")),
        None => (cfg.curves_csv.clone(), cfg.report_json.clone()),
    };
    write_file(&csv, &curves_csv(&s))?;
    write_file(&json, &report_json(&s))?;
    let mut o = Outcome { written: vec![csv.clone(), json.clone()], ..Default::default() };
    o.lines.push(format!("wrote {} and {}", csv.display(), json.display()));
    for n in &s.level_names {
        let w = s.report.agreement_window[n].map_or("none".into(), |w| w.to_string());
        o.lines.push(format!("{n}: rms {:.6} window {w}", s.report.rms_error[n]));
    }
    if !s.report.warnings.is_empty() {
        o.lines.push(format!("{} family terminations recorded in the report", s.report.warnings.len()));
    }
    if strict && s.report.max_im_residue >= IM_TOL {
        o.lines.push(format!("FAIL: imaginary residue {:e}", s.report.max_im_residue));
        o.code = EXIT_NUMERICAL;
    }
    Ok(o)
}

pub fn cmd_plotscript(csv: &Path, out: Option<&Path>) -> Result<Outcome> {
    let table = parse_csv(&fs::read_to_string(csv)?)?;
    let script = plot_script(&table)?;
    let path = out.map_or(csv.with_extension("py"), Path::to_path_buf);
    write_file(&path, &script)?;
    Ok(Outcome { code: EXIT_OK, lines: vec![format!("wrote {}", path.display())], written: vec![path] })
}

/// Caps the worker pool at `SCE_THREADS` when set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("SCE_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| Error::Config(format!("SCE_THREADS: expected a count, got '{v}'")))?;
    if n == 0 {
        return Err(Error::Config("SCE_THREADS must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::InvalidParameter(_) | Error::Config(_) | Error::Csv(_) | Error::Pole(_) => EXIT_VALIDATION,
        _ => EXIT_NUMERICAL,
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    init_threads()?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Plotscript { csv } => cmd_plotscript(csv, out),
        cmd => {
            let cfg = config_from(cli)?;
            match cmd {
                Command::Exact { tau, single } => cmd_exact(&cfg, *tau, *single, cli.strict, out),
                Command::Roots { tau } => cmd_roots(&cfg, *tau, out),
                Command::Sweep { levels } => cmd_sweep(&cfg, levels.as_deref(), cli.strict, out),
                Command::Plotscript { .. } => unreachable!(),
            }
        }
    }
}

/// Parses arguments, runs the command, prints its lines and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(o) => {
            for l in &o.lines {
                println!("{l}");
            }
            o.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
