//! Browser bindings. Every entry point takes the flat `key = value` run
//! configuration as text and returns a flat `Float64Array`.

use sce::cli::{atlas_rows, exact_rows, sweep, RunConfig};
use wasm_bindgen::prelude::*;

fn config(text: &str) -> Result<RunConfig, JsError> {
    let cfg = RunConfig::parse(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Rows of `[tau, E_quantum, E_oracle]` over the configured grid.
#[wasm_bindgen]
pub fn exact_curve(cfg: &str) -> Result<Vec<f64>, JsError> {
    let cfg = config(cfg)?;
    let rows = exact_rows(&cfg, &cfg.tau_grid())?;
    Ok(rows.iter().flat_map(|r| [r.tau, r.quantum, r.oracle]).collect())
}

/// Rows of `[re, im, structure]` at `tau`; `structure` is -1 when the root
/// belongs to none.
#[wasm_bindgen]
pub fn root_atlas(cfg: &str, tau: f64) -> Result<Vec<f64>, JsError> {
    let cfg = config(cfg)?;
    let rows = atlas_rows(&cfg, tau)?;
    Ok(rows
        .iter()
        .flat_map(|r| [r.root.alpha1.re, r.root.alpha1.im, r.root.structure_id.map_or(-1.0, |s| s as f64)])
        .collect())
}

/// Rows of `[tau, E_quantum, E_real, E_st1, ..., E_stK]` with
/// `K = structure_count`.
#[wasm_bindgen]
pub fn semiclassical_curves(cfg: &str) -> Result<Vec<f64>, JsError> {
    let cfg = config(cfg)?;
    let s = sweep(&cfg, &cfg.default_levels())?;
    Ok(s.rows.iter().flat_map(|r| std::iter::once(r.tau).chain([r.quantum]).chain(r.sc.iter().copied())).collect())
}
