//! Candidate selection by out-of-bag loss.

use serde::{Deserialize, Serialize};

use super::{fit_causal_forest, fit_regression_forest, FeatureMatrix, Forest, ForestParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOutcome {
    pub params: ForestParams,
    pub index: usize,
    /// Out-of-bag loss per candidate, in grid order; empty when there was
    /// nothing to compare.
    pub losses: Vec<f64>,
}

fn pick(candidates: &[ForestParams], losses: Vec<f64>) -> TuningOutcome {
    let mut best = 0;
    for (i, l) in losses.iter().enumerate() {
        if *l < losses[best] {
            best = i;
        }
    }
    TuningOutcome {
        params: candidates[best].clone(),
        index: best,
        losses,
    }
}

/// Mean out-of-bag R-loss `(y_i - tau_{-i}(x_i) w_i)^2` over rows with an
/// effect estimate.
pub fn r_loss(forest: &Forest, y_resid: &[f64], w_resid: &[f64]) -> Result<f64> {
    let preds = forest.predict_effects_oob()?;
    let mut total = 0.0;
    let mut n = 0usize;
    for ((p, y), w) in preds.iter().zip(y_resid).zip(w_resid) {
        if let Some(tau) = p.tau {
            total += (y - tau * w).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(total / n as f64)
}

/// Picks the causal-forest candidate with the smallest out-of-bag R-loss;
/// ties go to the earliest candidate. A single candidate is returned
/// without fitting.
pub fn tune_causal_forest(
    candidates: &[ForestParams],
    x: &FeatureMatrix,
    feature_names: &[String],
    y_resid: &[f64],
    w_resid: &[f64],
    clusters: &[usize],
) -> Result<TuningOutcome> {
    match candidates.len() {
        0 => Err(Error::Config("tuning grid is empty".into())),
        1 => Ok(TuningOutcome {
            params: candidates[0].clone(),
            index: 0,
            losses: Vec::new(),
        }),
        _ => {
            let losses = candidates
                .iter()
                .map(|p| {
                    let forest = fit_causal_forest(x, feature_names, y_resid, w_resid, clusters, p)?;
                    r_loss(&forest, y_resid, w_resid)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(pick(candidates, losses))
        }
    }
}

/// Picks the regression-forest candidate with the smallest out-of-bag mean
/// squared error.
pub fn tune_regression_forest(
    candidates: &[ForestParams],
    x: &FeatureMatrix,
    feature_names: &[String],
    target: &[f64],
    clusters: &[usize],
) -> Result<TuningOutcome> {
    match candidates.len() {
        0 => Err(Error::Config("tuning grid is empty".into())),
        1 => Ok(TuningOutcome {
            params: candidates[0].clone(),
            index: 0,
            losses: Vec::new(),
        }),
        _ => {
            let losses = candidates
                .iter()
                .map(|p| {
                    let forest = fit_regression_forest(x, feature_names, target, clusters, p)?;
                    let oob = forest.predict_out_of_bag();
                    Ok(oob
                        .values
                        .iter()
                        .zip(target)
                        .map(|(p, t)| (p - t).powi(2))
                        .sum::<f64>()
                        / target.len() as f64)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(pick(candidates, losses))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_is_an_error() {
        let x = FeatureMatrix::from_rows(&[vec![0.0]]).unwrap();
        let err = tune_causal_forest(&[], &x, &["a".into()], &[0.0], &[0.0], &[0]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn single_candidate_is_returned_unchanged() {
        let x = FeatureMatrix::from_rows(&[vec![0.0]]).unwrap();
        let p = ForestParams {
            min_node_size: 17,
            ..Default::default()
        };
        let out = tune_causal_forest(std::slice::from_ref(&p), &x, &["a".into()], &[0.0], &[0.0], &[0])
            .unwrap();
        assert_eq!(out.params, p);
    }
}
