//! End-to-end estimation: lagging, confounder encoding, double
//! orthogonalization, causal forest, average and group-average effects.

pub mod config;
pub mod effects;
pub mod encode;
pub mod reports;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::tune::{tune_causal_forest, TuningOutcome};
use crate::forest::{fit_causal_forest, EffectPrediction, FeatureMatrix, Forest, ForestParams};
use crate::panel::{Column, ColumnRole, PanelDataset};
use crate::stats;

pub use config::{FixedEffects, IndexSpec, PipelineConfig, SpeiConfig, TuningConfig};
pub use effects::{
    average_effect_from_predictions, estimate_average_effect, orthogonalize, per_sd_effect,
    AverageEffect, OrthDiagnostics, OrthogonalizedData,
};
pub use encode::{encode_categorical_means, one_hot};
pub use reports::{effect_heatmap, group_average_effects, quantile_bins, GateReport, HeatmapReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowEffect {
    pub unit_id: String,
    pub wave: i64,
    /// Effect per unit of treatment.
    pub tau: Option<f64>,
    pub std_err: Option<f64>,
    /// Effect per standard deviation of treatment.
    pub tau_per_sd: Option<f64>,
    pub std_err_per_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectResults {
    pub rows: Vec<RowEffect>,
    pub ate: AverageEffect,
    pub ate_per_sd: f64,
    pub ate_std_err_per_sd: f64,
    /// Sample standard deviation of the treatment over the analysis rows.
    pub treatment_sd: f64,
}

impl EffectResults {
    pub fn per_sd(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.tau_per_sd).collect()
    }

    pub fn summary(&self) -> EffectSummary {
        let mut v: Vec<f64> = self.rows.iter().filter_map(|r| r.tau_per_sd).collect();
        v.sort_by(f64::total_cmp);
        let q = |p| if v.is_empty() { f64::NAN } else { stats::quantile_sorted(&v, p) };
        let excluding_zero = self
            .rows
            .iter()
            .filter(|r| match (r.tau, r.std_err) {
                (Some(t), Some(s)) => t.abs() > 1.96 * s,
                _ => false,
            })
            .count();
        EffectSummary {
            n: v.len(),
            mean: stats::mean(&v),
            min: q(0.0),
            q05: q(0.05),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            max: q(1.0),
            share_ci_excludes_zero: excluding_zero as f64 / self.rows.len().max(1) as f64,
        }
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut out = String::from("unit_id,wave,tau,std_err,tau_per_sd,std_err_per_sd\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.unit_id,
                r.wave,
                opt(r.tau),
                opt(r.std_err),
                opt(r.tau_per_sd),
                opt(r.std_err_per_sd)
            ));
        }
        out
    }
}

/// Quantiles of the per-SD effect distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
    /// Rows whose 95% interval excludes zero.
    pub share_ci_excludes_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub placebo_seed: Option<u64>,
    pub data_fingerprint: String,
    pub n_input_rows: usize,
    pub n_analysis_rows: usize,
    /// Rows without an earlier wave, dropped by the lag.
    pub n_dropped_no_history: usize,
    pub n_units: usize,
    pub n_clusters: usize,
    pub confounders: Vec<String>,
    pub modifiers: Vec<String>,
    pub causal_params: ForestParams,
    pub causal_tuning: Option<TuningOutcome>,
    pub nuisance_params: ForestParams,
    pub warnings: Vec<String>,
    /// Wall-clock seconds per stage; excluded from results.json.
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub orthogonalized: OrthogonalizedData,
    pub forest: Forest,
    pub effects: EffectResults,
    pub gates: Vec<GateReport>,
    pub heatmaps: Vec<HeatmapReport>,
    pub metadata: RunMetadata,
    /// The analysis rows (after lagging) with their encoded features.
    pub analysis: PanelDataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub placebo: bool,
    pub placebo_seed: Option<u64>,
    pub outcome: String,
    pub treatment: String,
    pub n_rows: usize,
    pub n_units: usize,
    pub treatment_sd: f64,
    pub ate: AverageEffect,
    pub ate_per_sd: f64,
    pub ate_std_err_per_sd: f64,
    pub effect_distribution: EffectSummary,
    pub effects_path: String,
    pub gates: Vec<GateReport>,
    pub heatmaps: Vec<HeatmapReport>,
    pub orthogonalization: OrthDiagnostics,
    pub metadata: RunMetadata,
}

impl PipelineOutput {
    pub fn results_file(&self) -> ResultsFile {
        ResultsFile {
            placebo: self.metadata.placebo_seed.is_some(),
            placebo_seed: self.metadata.placebo_seed,
            outcome: self.analysis.outcome_name().to_owned(),
            treatment: self.analysis.treatment_name().to_owned(),
            n_rows: self.analysis.n_rows(),
            n_units: self.analysis.n_units(),
            treatment_sd: self.effects.treatment_sd,
            ate: self.effects.ate,
            ate_per_sd: self.effects.ate_per_sd,
            ate_std_err_per_sd: self.effects.ate_std_err_per_sd,
            effect_distribution: self.effects.summary(),
            effects_path: "effects.csv".to_owned(),
            gates: self.gates.clone(),
            heatmaps: self.heatmaps.clone(),
            orthogonalization: self.orthogonalized.diagnostics.clone(),
            metadata: self.metadata.clone(),
        }
    }

    /// File name and contents of every output: results.json, effects.csv,
    /// one `gate_<modifier>.csv` per modifier, one `heatmap_<a>_<b>.csv` per
    /// pair.
    pub fn output_files(&self) -> Result<Vec<(String, String)>> {
        let json = serde_json::to_string_pretty(&self.results_file())
            .map_err(|e| Error::Estimation(format!("cannot serialize results: {e}")))?;
        let mut files = vec![
            ("results.json".to_owned(), json + "\n"),
            ("effects.csv".to_owned(), self.effects.to_csv()),
        ];
        for g in &self.gates {
            files.push((format!("gate_{}.csv", g.modifier), g.to_csv()));
        }
        for h in &self.heatmaps {
            files.push((format!("heatmap_{}_{}.csv", h.modifier_a, h.modifier_b), h.to_csv()));
        }
        Ok(files)
    }
}

struct Stages {
    timings: Vec<StageTiming>,
}

impl Stages {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let (out, seconds) = timed(f);
        self.timings.push(StageTiming {
            stage: stage.to_owned(),
            seconds,
        });
        out.map_err(|e| e.at_stage(stage))
    }
}

/// Wall-clock seconds spent in `f`. There is no clock on bare wasm32, so
/// timings read zero there.
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = std::time::Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    (f(), 0.0)
}

/// Confounder columns: plain numeric confounders, indicator columns for
/// categorical ones and waves, and the fixed-effect means encoding.
fn confounder_columns(ds: &PanelDataset, cfg: &PipelineConfig) -> Result<Vec<(String, Vec<f64>)>> {
    let mut cols = Vec::new();
    for name in &cfg.confounders {
        let values = ds.numeric(name).map_err(|e| match e {
            Error::Data(_) if ds.column(name).is_some() => Error::Config(format!(
                "confounder `{name}` is categorical; list it under `dummies`"
            )),
            Error::Data(_) => Error::Config(format!("confounder `{name}` is not in the data")),
            other => other,
        })?;
        cols.push((name.clone(), values.to_vec()));
    }
    for name in &cfg.dummies {
        if ds.column(name).is_none() {
            return Err(Error::Config(format!("dummy column `{name}` is not in the data")));
        }
        for (level, col) in one_hot(&ds.labels(name)?) {
            cols.push((format!("{name}={level}"), col));
        }
    }
    if cfg.wave_dummies {
        let waves: Vec<String> = ds.waves().iter().map(|w| w.to_string()).collect();
        for (level, col) in one_hot(&waves) {
            cols.push((format!("{}={level}", ds.wave_name()), col));
        }
    }
    if let Some(fe) = &cfg.fixed_effects {
        if ds.column(&fe.column).is_none() {
            return Err(Error::Config(format!("fixed-effect column `{}` is not in the data", fe.column)));
        }
        let over: Vec<&[f64]> = fe
            .over
            .iter()
            .map(|c| {
                ds.numeric(c)
                    .map_err(|_| Error::Config(format!("fixed-effect column `{c}` is not numeric data")))
            })
            .collect::<Result<_>>()?;
        let encoded = encode_categorical_means(&ds.labels(&fe.column)?, &over)?;
        for (c, col) in fe.over.iter().zip(encoded) {
            cols.push((format!("fe_{}_{c}", fe.column), col));
        }
    }
    if cols.is_empty() {
        return Err(Error::Config("no confounders configured".into()));
    }
    Ok(cols)
}

fn matrix(cols: &[(String, Vec<f64>)]) -> Result<(Vec<String>, FeatureMatrix)> {
    let names = cols.iter().map(|(n, _)| n.clone()).collect();
    let slices: Vec<&[f64]> = cols.iter().map(|(_, c)| c.as_slice()).collect();
    Ok((names, FeatureMatrix::from_columns(&slices)?))
}

fn dataset_roles(ds: &PanelDataset, cfg: &PipelineConfig) -> Result<PanelDataset> {
    for (name, &role) in &cfg.roles {
        if ds.column(name).is_none() {
            return Err(Error::Config(format!("column `{name}` (role {role}) is not in the data")));
        }
    }
    let mut out = ds.clone();
    for (name, &role) in &cfg.roles {
        if out.column(name).map(|c| c.role) != Some(role) {
            out = out.with_role(name, role)?;
        }
    }
    Ok(out)
}

/// Runs the whole estimation on `ds`. Rows without an earlier wave leave the
/// analysis set when lags are configured.
pub fn run_pipeline(ds: &PanelDataset, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    run_inner(ds, cfg, None)
}

/// Permutes the treatment column uniformly at random (seeded), then reruns
/// the pipeline unchanged.
pub fn run_placebo(ds: &PanelDataset, cfg: &PipelineConfig, seed: u64) -> Result<PipelineOutput> {
    run_inner(ds, cfg, Some(seed))
}

/// The treatment column of `ds` shuffled with `seed`.
pub fn permute_treatment(ds: &PanelDataset, seed: u64) -> Result<PanelDataset> {
    let mut w = ds.treatment().to_vec();
    w.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ds.with_column(Column::numeric(ds.treatment_name(), ColumnRole::Treatment, w))
}

fn run_inner(raw: &PanelDataset, cfg: &PipelineConfig, placebo: Option<u64>) -> Result<PipelineOutput> {
    cfg.validate()?;
    let mut stages = Stages { timings: Vec::new() };
    let mut warnings = Vec::new();

    let ds = stages.run("roles", || {
        let ds = dataset_roles(raw, cfg)?;
        match placebo {
            Some(seed) => permute_treatment(&ds, seed),
            None => Ok(ds),
        }
    })?;
    let data_fingerprint = raw.fingerprint();

    let analysis = stages.run("lag", || {
        if cfg.lag.is_empty() {
            return Ok(ds.clone());
        }
        let cols: Vec<&str> = cfg.lag.iter().map(String::as_str).collect();
        ds.lag_columns(&cols)
    })?;
    let n_dropped = ds.n_rows() - analysis.n_rows();
    if n_dropped > 0 {
        warnings.push(format!("{n_dropped} rows without an earlier wave left the analysis set"));
    }

    let (conf_names, conf_x, mod_names, mod_x) = stages.run("encode", || {
        let (cn, cx) = matrix(&confounder_columns(&analysis, cfg)?)?;
        let mods = cfg
            .modifiers
            .iter()
            .map(|m| {
                let v = analysis
                    .numeric(m)
                    .map_err(|_| Error::Config(format!("modifier `{m}` is not a numeric column")))?;
                Ok((m.clone(), v.to_vec()))
            })
            .collect::<Result<Vec<_>>>()?;
        let (mn, mx) = matrix(&mods)?;
        Ok((cn, cx, mn, mx))
    })?;

    let y = analysis.outcome().to_vec();
    let w = analysis.treatment().to_vec();
    let clusters = analysis.cluster_codes();
    let n_clusters = clusters.iter().collect::<BTreeSet<_>>().len();

    let orth = stages.run("orthogonalize", || {
        orthogonalize(&conf_x, &conf_names, &y, &w, &clusters, &cfg.nuisance_grid())
    })?;
    if orth.diagnostics.flagged {
        warnings.push("orthogonalized residual means exceed tolerance".into());
    }
    if orth.diagnostics.oob_fallback_rows > 0 {
        warnings.push(format!(
            "{} rows were in-bag for every nuisance tree",
            orth.diagnostics.oob_fallback_rows
        ));
    }

    let (forest, tuning) = stages.run("causal-forest", || {
        let grid = cfg.causal_grid();
        let tuning = if grid.len() > 1 {
            Some(tune_causal_forest(&grid, &mod_x, &mod_names, &orth.y_resid, &orth.w_resid, &clusters)?)
        } else {
            None
        };
        let mut params = tuning.as_ref().map_or(&grid[0], |t| &t.params).clone();
        params.num_trees = cfg.forest.num_trees;
        let forest = fit_causal_forest(&mod_x, &mod_names, &orth.y_resid, &orth.w_resid, &clusters, &params)?;
        Ok((forest, tuning))
    })?;
    warnings.extend(forest.warnings.iter().cloned());

    let (effects, per_sd) = stages.run("effects", || {
        let preds = forest.predict_effects_oob()?;
        let ate = average_effect_from_predictions(&orth.y_resid, &orth.w_resid, &preds, &clusters)?;
        let treatment_sd = stats::sample_sd(&w);
        let ate_per_sd = per_sd_effect(ate.estimate, treatment_sd)?;
        let effects = effect_rows(&analysis, &preds, treatment_sd, ate, ate_per_sd)?;
        let per_sd = effects.per_sd();
        Ok((effects, per_sd))
    })?;
    if effects.ate.n_excluded > 0 {
        warnings.push(format!(
            "{} rows had no out-of-bag effect and were left out of the average",
            effects.ate.n_excluded
        ));
    }
    if !(effects.ate.std_err > 0.0) {
        warnings.push("average effect standard error is zero".into());
    }

    let (gates, heatmaps) = stages.run("reports", || {
        let rows: Vec<usize> = (0..per_sd.len()).filter(|&r| per_sd[r].is_some()).collect();
        let tau: Vec<f64> = rows.iter().map(|&r| per_sd[r].unwrap_or_default()).collect();
        let pick = |name: &str| -> Result<Vec<f64>> {
            let v = analysis.numeric(name)?;
            Ok(rows.iter().map(|&r| v[r]).collect())
        };
        let mut gates = Vec::new();
        let mut notes = Vec::new();
        for m in &mod_names {
            match group_average_effects(m, &pick(m)?, &tau, cfg.gate_bins) {
                Ok(g) => gates.push(g),
                Err(e) => notes.push(format!("group-average effects skipped: {e}")),
            }
        }
        let mut heatmaps = Vec::new();
        for (a, b) in &cfg.heatmaps {
            if analysis.column(a).is_none() || analysis.column(b).is_none() {
                return Err(Error::Config(format!("heatmap modifiers `{a}`, `{b}` must both be in the data")));
            }
            match effect_heatmap((a, b), &pick(a)?, &pick(b)?, &tau) {
                Ok(h) => heatmaps.push(h),
                Err(e) => notes.push(format!("heatmap skipped: {e}")),
            }
        }
        Ok((gates, heatmaps, notes))
    })
    .map(|(g, h, notes)| {
        warnings.extend(notes);
        (g, h)
    })?;

    let mut tagged = analysis.clone();
    for m in &mod_names {
        tagged = tagged.with_role(m, ColumnRole::Modifier)?;
    }
    for c in &cfg.confounders {
        if tagged.column(c).is_some_and(|c| c.role == ColumnRole::Auxiliary) {
            tagged = tagged.with_role(c, ColumnRole::Confounder)?;
        }
    }

    Ok(PipelineOutput {
        metadata: RunMetadata {
            placebo_seed: placebo,
            data_fingerprint,
            n_input_rows: raw.n_rows(),
            n_analysis_rows: analysis.n_rows(),
            n_dropped_no_history: n_dropped,
            n_units: analysis.n_units(),
            n_clusters,
            confounders: conf_names,
            modifiers: mod_names,
            causal_params: forest.params.clone(),
            causal_tuning: tuning,
            nuisance_params: orth
                .outcome_tuning
                .as_ref()
                .map_or_else(|| cfg.nuisance_grid()[0].clone(), |t| t.params.clone()),
            warnings,
            timings: stages.timings,
        },
        orthogonalized: orth,
        forest,
        effects,
        gates,
        heatmaps,
        analysis: tagged,
    })
}

fn effect_rows(
    ds: &PanelDataset,
    preds: &[EffectPrediction],
    treatment_sd: f64,
    ate: AverageEffect,
    ate_per_sd: f64,
) -> Result<EffectResults> {
    let units = ds.units();
    let waves = ds.waves();
    let rows = preds
        .iter()
        .enumerate()
        .map(|(r, p)| RowEffect {
            unit_id: units[r].clone(),
            wave: waves[r],
            tau: p.tau,
            std_err: p.std_err(),
            tau_per_sd: p.tau.map(|t| t * treatment_sd),
            std_err_per_sd: p.std_err().map(|s| s * treatment_sd),
        })
        .collect();
    Ok(EffectResults {
        rows,
        ate,
        ate_per_sd,
        ate_std_err_per_sd: per_sd_effect(ate.std_err, treatment_sd)?,
        treatment_sd,
    })
}

/// Reproducibility record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub config: String,
    pub data_fingerprints: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub stage_timings: Vec<StageTiming>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(tool_version: &str, command: &str, cfg: &PipelineConfig) -> Result<Self> {
        let config = cfg.to_toml()?;
        let mut seeds = BTreeMap::from([
            ("causal_forest".to_owned(), cfg.forest.seed),
            ("nuisance_forest".to_owned(), cfg.nuisance_forest.seed),
            ("synth".to_owned(), cfg.synth.seed),
        ]);
        if let Some(s) = cfg.placebo_seed {
            seeds.insert("placebo".to_owned(), s);
        }
        Ok(RunManifest {
            tool_version: tool_version.to_owned(),
            command: command.to_owned(),
            config_hash: stats::sha256_hex(config.as_bytes()),
            config,
            data_fingerprints: BTreeMap::new(),
            seeds,
            stage_timings: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn record(&mut self, prefix: &str, output: &PipelineOutput) {
        self.data_fingerprints
            .insert(format!("{prefix}data"), output.metadata.data_fingerprint.clone());
        self.stage_timings.extend(output.metadata.timings.iter().map(|t| StageTiming {
            stage: format!("{prefix}{}", t.stage),
            seconds: t.seconds,
        }));
        self.warnings
            .extend(output.metadata.warnings.iter().map(|w| format!("{prefix}{w}")));
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::Estimation(format!("cannot serialize manifest: {e}")))
    }
}
