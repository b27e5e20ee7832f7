//! Browser demo. Each operation takes and returns JSON text so the page can
//! stay plain JavaScript; the same functions are callable from Rust.

use hte_core::index::IndexModel;
use hte_core::pipeline::{run_pipeline, run_placebo, GateReport, HeatmapReport, PipelineConfig};
use hte_core::stats;
use hte_core::synth::{self, generate_panel};
use hte_core::weather::{fit_reference_distribution, standardize_to_spei};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitRequest {
    pub households: usize,
    pub seed: u64,
    pub tau_base: f64,
    pub beta_asset: f64,
    pub beta_adapt: f64,
    pub trees: usize,
    /// Permute the treatment with this seed before fitting.
    pub placebo_seed: Option<u64>,
}

impl Default for FitRequest {
    fn default() -> Self {
        FitRequest {
            households: 400,
            seed: 1,
            tau_base: 0.0,
            beta_asset: 0.15,
            beta_adapt: 0.08,
            trees: 200,
            placebo_seed: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FitResponse {
    pub n_rows: usize,
    pub treatment_sd: f64,
    pub ate_per_sd: f64,
    pub ate_std_err_per_sd: f64,
    /// Correlation of estimated and true per-row effects.
    pub truth_correlation: f64,
    pub heatmap: HeatmapReport,
    pub gates: Vec<GateReport>,
    pub warnings: Vec<String>,
}

/// Simulates a panel with the requested effect surface and fits it.
pub fn simulate_and_fit(request: &str) -> Result<String, String> {
    let req: FitRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if req.households < 20 || req.households > 3000 {
        return Err("households must lie between 20 and 3000".into());
    }
    if req.trees < 10 || req.trees > 2000 {
        return Err("trees must lie between 10 and 2000".into());
    }
    let mut cfg = PipelineConfig::default();
    cfg.set_seed(req.seed);
    cfg.synth.n_households = req.households;
    cfg.synth.treatment_sd = 1.0;
    cfg.synth.beta_lag2 = 0.0;
    cfg.synth.tau_base = req.tau_base;
    cfg.synth.beta_asset = req.beta_asset;
    cfg.synth.beta_adapt = req.beta_adapt;
    cfg.forest.num_trees = req.trees;
    cfg.nuisance_forest.num_trees = req.trees.div_ceil(2).max(10);
    cfg.gate_bins = 5;
    let panel = generate_panel(&cfg.synth).map_err(|e| e.to_string())?;
    let out = match req.placebo_seed {
        Some(s) => run_placebo(&panel.dataset, &cfg, s),
        None => run_pipeline(&panel.dataset, &cfg),
    }
    .map_err(|e| e.to_string())?;
    let truth = cfg.synth.oracle_effects(&out.analysis).map_err(|e| e.to_string())?;
    let (est, tru): (Vec<f64>, Vec<f64>) = out
        .effects
        .rows
        .iter()
        .zip(&truth)
        .filter_map(|(r, t)| r.tau.map(|v| (v, *t)))
        .unzip();
    let keep = [format!("{}_lag", synth::ASSET), format!("{}_lag", synth::ADAPT)];
    let resp = FitResponse {
        n_rows: out.analysis.n_rows(),
        treatment_sd: out.effects.treatment_sd,
        ate_per_sd: out.effects.ate_per_sd,
        ate_std_err_per_sd: out.effects.ate_std_err_per_sd,
        truth_correlation: stats::pearson(&est, &tru),
        heatmap: out.heatmaps.into_iter().next().ok_or("no heatmap produced")?,
        gates: out.gates.into_iter().filter(|g| keep.contains(&g.modifier)).collect(),
        warnings: out.metadata.warnings,
    };
    serde_json::to_string(&resp).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct SpeiResponse {
    pub shape: f64,
    pub scale: f64,
    pub origin: f64,
    /// `[balance, spei]` for each input value, sorted by balance.
    pub curve: Vec<[f64; 2]>,
    pub clamped: usize,
}

/// Fits the reference distribution to a water-balance series (numbers
/// separated by commas, spaces or newlines) and maps each value to SPEI.
pub fn spei_curve(series: &str) -> Result<String, String> {
    let mut values = series
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: `{s}`")))
        .collect::<Result<Vec<_>, _>>()?;
    let model = fit_reference_distribution(&values).map_err(|e| e.to_string())?;
    values.sort_by(f64::total_cmp);
    let mut clamped = 0;
    let curve = values
        .iter()
        .map(|&v| {
            let s = standardize_to_spei(v, &model);
            clamped += usize::from(s.clamped);
            [v, s.spei]
        })
        .collect();
    let d = &model.distribution;
    serde_json::to_string(&SpeiResponse {
        shape: d.shape,
        scale: d.scale,
        origin: d.origin,
        curve,
        clamped,
    })
    .map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct IndexResponse {
    pub model: IndexModel,
    pub scores: Vec<f64>,
}

/// First-component index from a CSV of item columns (header row required).
pub fn composite_index(csv_text: &str) -> Result<String, String> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let items: Vec<String> = rdr
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let mut columns = vec![Vec::new(); items.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        for (col, cell) in columns.iter_mut().zip(rec.iter()) {
            let v = cell
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("row {}: not a number: `{cell}`", i + 1))?;
            col.push(v);
        }
    }
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    let model = IndexModel::fit_columns(&items, &refs).map_err(|e| e.to_string())?;
    let scores = (0..refs.first().map_or(0, |c| c.len()))
        .map(|r| {
            let row: Vec<f64> = refs.iter().map(|c| c[r]).collect();
            model.score(&row)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    serde_json::to_string(&IndexResponse { model, scores }).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = simulateAndFit)]
pub fn simulate_and_fit_js(request: &str) -> Result<String, JsError> {
    simulate_and_fit(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = speiCurve)]
pub fn spei_curve_js(series: &str) -> Result<String, JsError> {
    spei_curve(series).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = compositeIndex)]
pub fn composite_index_js(csv_text: &str) -> Result<String, JsError> {
    composite_index(csv_text).map_err(|e| JsError::new(&e))
}
