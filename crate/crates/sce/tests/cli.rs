use std::fs;
use std::path::Path;

use proptest::prelude::*;
use sce::cli::*;
use sce::entanglement::Level;
use sce::C64;
use tempfile::tempdir;

fn run_in(dir: &Path, args: &[&str]) -> i32 {
    let mut v = vec!["sce".to_string()];
    v.extend(args.iter().map(|a| a.replace("{d}", dir.to_str().unwrap())));
    run(v)
}

#[test]
fn config_parsing() {
    let cfg = RunConfig::parse("# reference values\nlambda = 1\nj = 2.5  # half integer\nz0 = 0.5,-0.25\ns0 = 2\nnmax = 12\n\n").unwrap();
    assert_eq!(cfg.params.j, 2.5);
    assert_eq!(cfg.params.z0, C64::new(0.5, -0.25));
    assert_eq!(cfg.params.s0, C64::new(2.0, 0.0));
    assert_eq!(cfg.nmax, Some(12));
    assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    for bad in ["lambda 1", "lambda = x", "frobnicate = 1", "z0 = 1,2,3", "scan_upper_half = yes", "tau_count = -4"] {
        assert!(RunConfig::parse(bad).is_err(), "{bad}");
    }
    let mut cfg = RunConfig::default();
    cfg.set("j", "1.3").unwrap();
    assert!(cfg.validate().is_err());
    let mut cfg = RunConfig::default();
    cfg.set("tau_stop", "0").unwrap();
    assert!(cfg.validate().is_err());
}

#[test]
fn levels_and_grid() {
    let cfg = RunConfig::default();
    assert_eq!(cfg.default_levels(), vec![Level::Real, Level::Upto(1), Level::Upto(2), Level::Upto(3), Level::Upto(4), Level::Upto(5)]);
    assert_eq!(cfg.level_name(Level::Upto(5)), "all");
    assert_eq!(cfg.level_name(Level::Upto(2)), "st2");
    assert_eq!(cfg.parse_levels("all, real,st2,real").unwrap(), vec![Level::Real, Level::Upto(2), Level::Upto(5)]);
    assert!(cfg.parse_levels("st6").is_err());
    assert!(cfg.parse_levels("").is_err());
    let g = cfg.tau_grid();
    assert_eq!(g.len(), 500);
    assert_eq!(g[0], 0.0);
    assert!(g[499] < 1.0);
}

#[test]
fn number_format() {
    assert_eq!(fmt_num(-0.0), fmt_num(0.0));
    assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
    assert_eq!(fmt_num(0.1).parse::<f64>().unwrap(), 0.1);
}

fn finite() -> impl Strategy<Value = f64> {
    -1e3..1e3f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn config_round_trip(
        lambda in finite(), two_j in 1u32..40, zr in finite(), zi in finite(), sr in finite(), si in finite(),
        start in 0.0..1.0f64, count in 2usize..2000, nmax in proptest::option::of(1usize..200),
        upper in any::<bool>(), cap in 0.5..2.0f64, sub in 1e-5..1e-2f64,
    ) {
        let mut cfg = RunConfig::default();
        cfg.params.lambda = lambda;
        cfg.params.j = two_j as f64 / 2.0;
        cfg.params.z0 = C64::new(zr, zi);
        cfg.params.s0 = C64::new(sr, si);
        cfg.tau_start = start;
        cfg.tau_count = count;
        cfg.nmax = nmax;
        cfg.scan.upper_half = upper;
        cfg.admission.cap = cap;
        cfg.family.substep = sub;
        cfg.curves_csv = "out/c.csv".into();
        prop_assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}

#[test]
fn exact_command_outputs() {
    let d = tempdir().unwrap();
    assert_eq!(run_in(d.path(), &["exact", "--out", "{d}/e.csv"]), EXIT_OK);
    let text = fs::read_to_string(d.path().join("e.csv")).unwrap();
    let t = parse_csv(&text).unwrap();
    assert_eq!(t.header, ["tau", "E_quantum", "E_oracle", "abs_diff"]);
    assert_eq!(t.rows.len(), 500);
    assert!(t.rows.iter().all(|r| r[3].unwrap() < 1e-10));

    assert_eq!(run_in(d.path(), &["exact", "--tau", "0.5", "--single", "--out", "{d}/one.csv"]), EXIT_OK);
    let t = parse_csv(&fs::read_to_string(d.path().join("one.csv")).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.rows[0][0], Some(0.5));

    assert_eq!(run_in(d.path(), &["exact", "--j", "1", "--strict", "--out", "{d}/j1.csv"]), EXIT_OK);
    let t = parse_csv(&fs::read_to_string(d.path().join("j1.csv")).unwrap()).unwrap();
    let e: Vec<f64> = t.rows.iter().map(|r| r[1].unwrap()).collect();
    for k in 1..e.len() {
        assert!((e[k] - e[e.len() - k]).abs() < 1e-10);
    }
}

#[test]
fn exit_codes() {
    let d = tempdir().unwrap();
    assert_eq!(run_in(d.path(), &["exact", "--set", "j=1.3", "--out", "{d}/x.csv"]), EXIT_VALIDATION);
    assert_eq!(run_in(d.path(), &["exact", "--set", "j", "--out", "{d}/x.csv"]), EXIT_VALIDATION);
    assert_eq!(run_in(d.path(), &["frobnicate"]), EXIT_VALIDATION);
    assert_eq!(run_in(d.path(), &["exact", "--config", "{d}/missing.cfg"]), EXIT_IO);
    // a short truncation only warns unless --strict
    assert_eq!(run_in(d.path(), &["exact", "--set", "nmax=8", "--out", "{d}/n.csv"]), EXIT_OK);
    assert_eq!(run_in(d.path(), &["exact", "--set", "nmax=8", "--strict", "--out", "{d}/n.csv"]), EXIT_NUMERICAL);
    assert_eq!(run_in(d.path(), &["sweep", "--levels", "st9", "--out", "{d}/s.csv"]), EXIT_VALIDATION);
    fs::write(d.path().join("bad.csv"), "tau,E_quantum\n0.1,0.2\n0.3\n").unwrap();
    assert_eq!(run_in(d.path(), &["plotscript", "{d}/bad.csv"]), EXIT_VALIDATION);
    fs::write(d.path().join("cfg.txt"), "tau_count = 1\n").unwrap();
    assert_eq!(run_in(d.path(), &["exact", "--config", "{d}/cfg.txt", "--out", "{d}/x.csv"]), EXIT_VALIDATION);
}

#[test]
fn malformed_csv_is_rejected() {
    assert!(parse_csv("").is_err());
    assert!(parse_csv("a,b\n1,2,3\n").is_err());
    assert!(parse_csv("a,b\n1,zz\n").is_err());
    let t = parse_csv("a,b\n1,\n").unwrap();
    assert_eq!(t.rows[0], [Some(1.0), None]);
}

#[test]
fn roots_command() {
    let d = tempdir().unwrap();
    let cfg = RunConfig::default();
    let o = cmd_roots(&cfg, Some(0.5), Some(&d.path().join("a.csv"))).unwrap();
    assert_eq!(o.code, EXIT_OK);
    assert!(o.lines.iter().any(|l| l == "St1: 6"));
    assert!(o.lines.iter().any(|l| l == "St2: 6"));
    let text = fs::read_to_string(d.path().join("a.csv")).unwrap();
    assert!(text.starts_with("tau,re_alpha1,im_alpha1,residual,structure_id,family_id\n"));
    let o2 = cmd_roots(&cfg, Some(0.5), Some(&d.path().join("b.csv"))).unwrap();
    assert_eq!(o.lines[1..], o2.lines[1..]);
    assert_eq!(text, fs::read_to_string(d.path().join("b.csv")).unwrap());

    let rows = atlas_rows(&cfg, 1e-5).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(structure_counts(&rows).get(&Some(1)), Some(&1));
    assert_eq!(rows[0].family_id, Some(0));

    let script_path = d.path().join("a.py");
    assert_eq!(run_in(d.path(), &["plotscript", "{d}/a.csv"]), EXIT_OK);
    let script = fs::read_to_string(&script_path).unwrap();
    assert!(script.contains("matplotlib") && script.contains("scatter") && script.contains("cos"));
}

fn small() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.tau_count = 100;
    cfg
}

#[test]
fn sweep_outputs_and_determinism() {
    let d = tempdir().unwrap();
    let cfg = small();
    let a = cmd_sweep(&cfg, None, true, Some(&d.path().join("a.csv"))).unwrap();
    let b = cmd_sweep(&cfg, None, true, Some(&d.path().join("b.csv"))).unwrap();
    assert_eq!(a.code, EXIT_OK);
    assert_eq!(b.code, EXIT_OK);
    let read = |n: &str| fs::read(d.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.json"), read("b.json"));

    let t = parse_csv(&String::from_utf8(read("a.csv")).unwrap()).unwrap();
    assert_eq!(
        t.header,
        ["tau", "E_quantum", "E_sc_real", "E_sc_st1", "E_sc_st2", "E_sc_st3", "E_sc_st4", "E_sc_all", "im_residue", "n_admitted"]
    );
    assert_eq!(t.rows.len(), 100);
    let report: serde_json::Value = serde_json::from_slice(&read("a.json")).unwrap();
    for key in ["rms_error", "agreement_window", "families", "warnings", "max_im_residue"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    let fam = &report["families"][0];
    assert!(fam.get("birth_tau").is_some() && fam.get("death_tau").is_some() && fam.get("structure").is_some());

    let plot = cmd_plotscript(&d.path().join("a.csv"), None).unwrap();
    let script = fs::read_to_string(&plot.written[0]).unwrap();
    for col in ["E_sc_real", "E_sc_st1", "E_sc_st4", "E_sc_all"] {
        assert!(script.contains(col), "{col}");
    }
    let again = cmd_plotscript(&d.path().join("a.csv"), Some(&d.path().join("again.py"))).unwrap();
    assert_eq!(script, fs::read_to_string(&again.written[0]).unwrap());
}

#[test]
fn sweep_level_subset() {
    let cfg = small();
    let s = sweep(&cfg, &cfg.parse_levels("real").unwrap()).unwrap();
    assert_eq!(s.level_names, ["real"]);
    assert!(s.rows.iter().all(|r| r.sc.len() == 1));
    assert!(curves_csv(&s).starts_with("tau,E_quantum,E_sc_real,im_residue,n_admitted\n"));
    let full = sweep(&cfg, &cfg.default_levels()).unwrap();
    for (a, b) in s.rows.iter().zip(&full.rows) {
        assert_eq!(a.sc[0], b.sc[0]);
    }
}
