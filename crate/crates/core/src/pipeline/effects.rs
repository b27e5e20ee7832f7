//! Double orthogonalization and the doubly robust average effect.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::tune::{tune_regression_forest, TuningOutcome};
use crate::forest::{fit_regression_forest, EffectPrediction, FeatureMatrix, Forest, ForestParams};
use crate::stats;

/// Residual means above this fraction of the raw standard deviation flag the
/// run.
pub const RESIDUAL_MEAN_TOL: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfounderCorrelation {
    pub confounder: String,
    pub outcome_residual: f64,
    pub treatment_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthDiagnostics {
    pub outcome_residual_mean: f64,
    pub treatment_residual_mean: f64,
    pub outcome_sd: f64,
    pub treatment_sd: f64,
    pub treatment_residual_sd: f64,
    pub correlations: Vec<ConfounderCorrelation>,
    /// Residual means outside tolerance.
    pub flagged: bool,
    pub oob_fallback_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalizedData {
    pub y_resid: Vec<f64>,
    pub w_resid: Vec<f64>,
    pub confounders: Vec<String>,
    pub diagnostics: OrthDiagnostics,
    pub outcome_tuning: Option<TuningOutcome>,
    pub treatment_tuning: Option<TuningOutcome>,
}

impl OrthogonalizedData {
    /// Residuals from global means only: the no-adjustment baseline.
    pub fn centered_only(outcome: &[f64], treatment: &[f64]) -> Self {
        let (my, mw) = (stats::mean(outcome), stats::mean(treatment));
        let y_resid: Vec<f64> = outcome.iter().map(|v| v - my).collect();
        let w_resid: Vec<f64> = treatment.iter().map(|v| v - mw).collect();
        OrthogonalizedData {
            diagnostics: OrthDiagnostics {
                outcome_residual_mean: stats::mean(&y_resid),
                treatment_residual_mean: stats::mean(&w_resid),
                outcome_sd: stats::sample_sd(outcome),
                treatment_sd: stats::sample_sd(treatment),
                treatment_residual_sd: stats::sample_sd(&w_resid),
                correlations: Vec::new(),
                flagged: false,
                oob_fallback_rows: 0,
            },
            y_resid,
            w_resid,
            confounders: Vec::new(),
            outcome_tuning: None,
            treatment_tuning: None,
        }
    }
}

/// Residualizes outcome and treatment on the confounders with two honest
/// regression forests, using out-of-bag predictions. When `grid` holds more
/// than one candidate, each forest is tuned on out-of-bag error first.
pub fn orthogonalize(
    x: &FeatureMatrix,
    confounders: &[String],
    outcome: &[f64],
    treatment: &[f64],
    clusters: &[usize],
    grid: &[ForestParams],
) -> Result<OrthogonalizedData> {
    if grid.is_empty() {
        return Err(Error::Config("nuisance forest grid is empty".into()));
    }
    let fit = |target: &[f64]| -> Result<(Vec<f64>, usize, Option<TuningOutcome>)> {
        let tuning = if grid.len() > 1 {
            Some(tune_regression_forest(grid, x, confounders, target, clusters)?)
        } else {
            None
        };
        let params = tuning.as_ref().map_or(&grid[0], |t| &t.params);
        let forest = fit_regression_forest(x, confounders, target, clusters, params)?;
        let oob = forest.predict_out_of_bag();
        let resid = target.iter().zip(&oob.values).map(|(t, p)| t - p).collect();
        Ok((resid, oob.fallback_rows.len(), tuning))
    };
    let (y_resid, y_fallback, outcome_tuning) = fit(outcome)?;
    let (w_resid, w_fallback, treatment_tuning) = fit(treatment)?;

    let correlations = confounders
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = x.column(j);
            let corr = |r: &[f64]| {
                let c = stats::pearson(&col, r);
                if c.is_finite() {
                    c
                } else {
                    0.0
                }
            };
            ConfounderCorrelation {
                confounder: name.clone(),
                outcome_residual: corr(&y_resid),
                treatment_residual: corr(&w_resid),
            }
        })
        .collect();
    let outcome_sd = stats::sample_sd(outcome);
    let treatment_sd = stats::sample_sd(treatment);
    let outcome_residual_mean = stats::mean(&y_resid);
    let treatment_residual_mean = stats::mean(&w_resid);
    let flagged = outcome_residual_mean.abs() > RESIDUAL_MEAN_TOL * outcome_sd
        || treatment_residual_mean.abs() > RESIDUAL_MEAN_TOL * treatment_sd;
    Ok(OrthogonalizedData {
        diagnostics: OrthDiagnostics {
            outcome_residual_mean,
            treatment_residual_mean,
            outcome_sd,
            treatment_sd,
            treatment_residual_sd: stats::sample_sd(&w_resid),
            correlations,
            flagged,
            oob_fallback_rows: y_fallback.max(w_fallback),
        },
        y_resid,
        w_resid,
        confounders: confounders.to_vec(),
        outcome_tuning,
        treatment_tuning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageEffect {
    pub estimate: f64,
    pub std_err: f64,
    pub n_used: usize,
    /// Rows without an out-of-bag effect, left out of the average.
    pub n_excluded: usize,
}

/// Doubly robust average partial effect from out-of-bag predictions:
/// `G_i = tau_i + w_i / V_i * (y_i - tau_i w_i)` with `V_i` the forest-kernel
/// treatment variance at `x_i`; the standard error sums scores within
/// clusters.
pub fn average_effect_from_predictions(
    y_resid: &[f64],
    w_resid: &[f64],
    predictions: &[EffectPrediction],
    clusters: &[usize],
) -> Result<AverageEffect> {
    if y_resid.is_empty() {
        return Err(Error::Estimation("no rows to average".into()));
    }
    if predictions.len() != y_resid.len() || w_resid.len() != y_resid.len() || clusters.len() != y_resid.len() {
        return Err(Error::Data("average effect inputs differ in length".into()));
    }
    let mut scores = Vec::with_capacity(y_resid.len());
    let mut score_clusters = Vec::with_capacity(y_resid.len());
    for i in 0..y_resid.len() {
        let p = &predictions[i];
        let Some(tau) = p.tau.filter(|_| p.treatment_variance > 0.0) else {
            continue;
        };
        let weight = w_resid[i] / p.treatment_variance;
        scores.push(tau + weight * (y_resid[i] - tau * w_resid[i]));
        score_clusters.push(clusters[i]);
    }
    let n = scores.len();
    if n < 2 {
        return Err(Error::Estimation("fewer than two rows have an effect estimate".into()));
    }
    let estimate = stats::mean(&scores);
    let mut sums: BTreeMap<usize, f64> = BTreeMap::new();
    for (s, c) in scores.iter().zip(&score_clusters) {
        *sums.entry(*c).or_default() += s - estimate;
    }
    let g = sums.len() as f64;
    if g < 2.0 {
        return Err(Error::Estimation("cluster-robust standard error needs two clusters".into()));
    }
    let ss: f64 = sums.values().map(|s| s * s).sum();
    let std_err = (g / (g - 1.0) * ss).sqrt() / n as f64;
    Ok(AverageEffect {
        estimate,
        std_err,
        n_used: n,
        n_excluded: y_resid.len() - n,
    })
}

pub fn estimate_average_effect(
    orth: &OrthogonalizedData,
    forest: &Forest,
    clusters: &[usize],
) -> Result<AverageEffect> {
    let preds = forest.predict_effects_oob()?;
    average_effect_from_predictions(&orth.y_resid, &orth.w_resid, &preds, clusters)
}

/// Effect per standard deviation of treatment.
pub fn per_sd_effect(tau_per_unit: f64, sd_w: f64) -> Result<f64> {
    if !(sd_w > 0.0) {
        return Err(Error::Data(format!("treatment sd must be positive, got {sd_w}")));
    }
    Ok(tau_per_unit * sd_w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_sd_identity() {
        assert_eq!(per_sd_effect(0.37, 1.0).unwrap(), 0.37);
        assert!(per_sd_effect(1.0, 0.0).is_err());
    }

    #[test]
    fn empty_average_is_an_error() {
        assert!(average_effect_from_predictions(&[], &[], &[], &[]).is_err());
    }

    #[test]
    fn score_average_with_exact_fit() {
        // tau fits every row exactly, so each score equals tau.
        let preds: Vec<EffectPrediction> = (0..4)
            .map(|_| EffectPrediction {
                tau: Some(2.0),
                variance: None,
                treatment_variance: 1.0,
                oob_fallback: false,
            })
            .collect();
        let w = [1.0, -1.0, 0.5, -0.5];
        let y: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
        let ate = average_effect_from_predictions(&y, &w, &preds, &[0, 1, 2, 3]).unwrap();
        assert_eq!(ate.estimate, 2.0);
        assert_eq!(ate.std_err, 0.0);
    }
}
