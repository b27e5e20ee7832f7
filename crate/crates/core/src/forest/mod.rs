//! Honest random forests.
//!
//! Two forest kinds share one tree grower:
//!
//! * regression forests split on variance reduction of the target and
//!   predict leaf means;
//! * causal forests split on gradient pseudo-outcomes of a local
//!   residual-on-residual regression and predict a kernel-weighted effect
//!   `sum a_i (w_i - w_bar)(y_i - y_bar) / sum a_i (w_i - w_bar)^2`.
//!
//! Trees are grown in groups of `ci_group_size`; each group draws a half
//! sample of clusters and its trees subsample from it. Variance estimates
//! come from comparing group-level and tree-level spread of the linearized
//! estimating equation ("little bags").
//!
//! Tree `t` draws from a ChaCha8 stream seeded with `seed ^ t`, and groups
//! are assembled in index order, so results do not depend on the number of
//! worker threads.

mod sampling;
mod tree;
pub mod tune;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use sampling::{choose, honest_halves, Clusters};
pub use tree::{Node, Tree};
use tree::{grow, GrowParams, SplitRule};

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::Data(format!(
                "feature matrix of {n_rows}x{n_cols} needs {} values, got {}",
                n_rows * n_cols,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite feature value at row {}, column {}",
                i / n_cols.max(1),
                i % n_cols.max(1)
            )));
        }
        Ok(FeatureMatrix {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Data("ragged feature rows".into()));
        }
        Self::new(rows.len(), n_cols, rows.concat())
    }

    pub fn from_columns(columns: &[&[f64]]) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::Data("feature columns differ in length".into()));
        }
        let mut values = Vec::with_capacity(n_rows * columns.len());
        for r in 0..n_rows {
            values.extend(columns.iter().map(|c| c[r]));
        }
        Self::new(n_rows, columns.len(), values)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub num_trees: usize,
    /// Fraction of clusters drawn (without replacement) for each tree.
    pub sample_fraction: f64,
    /// Fraction of each tree's clusters used for choosing splits.
    pub honesty_fraction: f64,
    /// Minimum number of rows per child, counted in both halves.
    pub min_node_size: usize,
    /// Features tried per split; `None` picks the per-kind default.
    pub mtry: Option<usize>,
    pub seed: u64,
    pub cluster_aware: bool,
    /// Trees per half-sample group; 1 disables variance estimates.
    pub ci_group_size: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            num_trees: 2000,
            sample_fraction: 0.5,
            honesty_fraction: 0.5,
            min_node_size: 5,
            mtry: None,
            seed: 42,
            cluster_aware: true,
            ci_group_size: 2,
        }
    }
}

impl ForestParams {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_trees == 0 {
            return bad("num_trees must be at least 1".into());
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return bad(format!("sample_fraction {} not in (0, 1]", self.sample_fraction));
        }
        if !(self.honesty_fraction > 0.0 && self.honesty_fraction < 1.0) {
            return bad(format!("honesty_fraction {} not in (0, 1)", self.honesty_fraction));
        }
        if self.min_node_size == 0 {
            return bad("min_node_size must be at least 1".into());
        }
        if self.ci_group_size == 0 {
            return bad("ci_group_size must be at least 1".into());
        }
        if self.ci_group_size > 1 && self.sample_fraction > 0.5 {
            return bad("ci_group_size > 1 requires sample_fraction <= 0.5".into());
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > n_features {
                return bad(format!("mtry {m} must lie in 1..={n_features}"));
            }
        }
        Ok(())
    }

    fn resolved_mtry(&self, kind: ForestKind, p: usize) -> usize {
        self.mtry.unwrap_or_else(|| {
            let root = (p as f64).sqrt();
            let m = match kind {
                ForestKind::Regression => root.ceil(),
                ForestKind::Causal => (root + 20.0).ceil(),
            };
            (m as usize).clamp(1, p.max(1))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForestKind {
    Regression,
    Causal,
}

/// Leaf means of the estimation rows.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct LeafSummary {
    w: f64,
    y: f64,
    ww: f64,
    wy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectPrediction {
    /// Effect per unit of treatment; `None` when the kernel-weighted
    /// treatment variance is zero.
    pub tau: Option<f64>,
    pub variance: Option<f64>,
    /// Kernel-weighted treatment variance `sum a_i (w_i - w_bar)^2`.
    pub treatment_variance: f64,
    /// The row was in every tree's subsample and got a full-forest prediction.
    pub oob_fallback: bool,
}

impl EffectPrediction {
    pub fn std_err(&self) -> Option<f64> {
        self.variance.map(f64::sqrt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OobPredictions {
    pub values: Vec<f64>,
    /// Rows that were in-bag for every tree and fell back to the full forest.
    pub fallback_rows: Vec<usize>,
}

/// Fitted honest forest together with the training data it needs for
/// prediction. Immutable after fitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forest {
    pub kind: ForestKind,
    pub params: ForestParams,
    pub mtry: usize,
    pub feature_names: Vec<String>,
    pub schema_fingerprint: String,
    pub trees: Vec<Tree>,
    x: FeatureMatrix,
    /// Regression target, or the outcome residual translated by its first
    /// value (causal forests depend on it only through differences).
    outcome: Vec<f64>,
    treatment: Option<Vec<f64>>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    leaves: Vec<Vec<LeafSummary>>,
}

impl PartialEq for Forest {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.params == other.params
            && self.mtry == other.mtry
            && self.feature_names == other.feature_names
            && self.trees == other.trees
            && self.x == other.x
            && self.outcome == other.outcome
            && self.treatment == other.treatment
    }
}

pub fn schema_fingerprint(names: &[String]) -> String {
    stats::sha256_hex(names.join("\u{1f}").as_bytes())
}

struct RegressionRule<'a> {
    y: &'a [f64],
}

impl SplitRule for RegressionRule<'_> {
    fn relabel(&self, rows: &[u32], out: &mut Vec<f64>) -> bool {
        let first = self.y[rows[0] as usize];
        if rows.iter().all(|&r| self.y[r as usize] == first) {
            return false;
        }
        let mean = rows.iter().map(|&r| self.y[r as usize]).sum::<f64>() / rows.len() as f64;
        out.clear();
        out.extend(rows.iter().map(|&r| self.y[r as usize] - mean));
        true
    }

    fn leaf_ok(&self, estimation: &[u32]) -> bool {
        !estimation.is_empty()
    }
}

struct CausalRule<'a> {
    y: &'a [f64],
    w: &'a [f64],
}

impl SplitRule for CausalRule<'_> {
    fn relabel(&self, rows: &[u32], out: &mut Vec<f64>) -> bool {
        let n = rows.len() as f64;
        let (mut sw, mut sy) = (0.0, 0.0);
        for &r in rows {
            sw += self.w[r as usize];
            sy += self.y[r as usize];
        }
        let (w_bar, y_bar) = (sw / n, sy / n);
        let (mut sww, mut swy) = (0.0, 0.0);
        for &r in rows {
            let wc = self.w[r as usize] - w_bar;
            sww += wc * wc;
            swy += wc * (self.y[r as usize] - y_bar);
        }
        if !(sww > 0.0) {
            return false;
        }
        let tau = swy / sww;
        let mean_ww = sww / n;
        out.clear();
        out.extend(rows.iter().map(|&r| {
            let wc = self.w[r as usize] - w_bar;
            let yc = self.y[r as usize] - y_bar;
            wc * (yc - tau * wc) / mean_ww
        }));
        true
    }

    fn leaf_ok(&self, estimation: &[u32]) -> bool {
        match estimation.first() {
            None => false,
            Some(&first) => {
                let w0 = self.w[first as usize];
                estimation.iter().any(|&r| self.w[r as usize] != w0)
            }
        }
    }
}

fn check_inputs(x: &FeatureMatrix, names: &[String], lens: &[(&str, usize)]) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(Error::Estimation("cannot fit a forest on empty data".into()));
    }
    if names.len() != x.n_cols() {
        return Err(Error::Data(format!(
            "{} feature names for {} columns",
            names.len(),
            x.n_cols()
        )));
    }
    for (what, len) in lens {
        if *len != x.n_rows() {
            return Err(Error::Data(format!(
                "{what} has {len} entries, feature matrix has {} rows",
                x.n_rows()
            )));
        }
    }
    Ok(())
}

fn fit_trees<S: SplitRule>(
    x: &FeatureMatrix,
    rule: &S,
    cluster_codes: &[usize],
    params: &ForestParams,
    mtry: usize,
) -> Result<Vec<Tree>> {
    let clusters = Clusters::new(cluster_codes, params.cluster_aware);
    let g = clusters.len();
    let group = params.ci_group_size;
    let pool_size = if group > 1 { g / 2 } else { g };
    if pool_size < 2 {
        return Err(Error::Estimation(format!(
            "{g} clusters are too few to subsample honestly"
        )));
    }
    let per_tree = ((params.sample_fraction * g as f64).round() as usize).clamp(2, pool_size);
    let all: Vec<usize> = (0..g).collect();
    let grow_params = GrowParams {
        mtry,
        min_node_size: params.min_node_size,
    };
    let n_groups = params.num_trees.div_ceil(group);

    let build_group = |gi: usize| -> Vec<Tree> {
        let first = gi * group;
        let last = (first + group).min(params.num_trees);
        let pool = if group > 1 {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ first as u64);
            rng.set_stream(1);
            choose(&mut rng, &all, pool_size)
        } else {
            all.clone()
        };
        (first..last)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ t as u64);
                let drawn = choose(&mut rng, &pool, per_tree);
                let (split, est) = honest_halves(&mut rng, &drawn, params.honesty_fraction);
                grow(
                    x,
                    rule,
                    clusters.rows_of(&split),
                    clusters.rows_of(&est),
                    &grow_params,
                    &mut rng,
                )
            })
            .collect()
    };

    #[cfg(feature = "parallel")]
    let groups: Vec<Vec<Tree>> = (0..n_groups).into_par_iter().map(build_group).collect();
    #[cfg(not(feature = "parallel"))]
    let groups: Vec<Vec<Tree>> = (0..n_groups).map(build_group).collect();
    Ok(groups.into_iter().flatten().collect())
}

/// Honest regression forest of `target` on `x`.
pub fn fit_regression_forest(
    x: &FeatureMatrix,
    feature_names: &[String],
    target: &[f64],
    clusters: &[usize],
    params: &ForestParams,
) -> Result<Forest> {
    check_inputs(
        x,
        feature_names,
        &[("target", target.len()), ("clusters", clusters.len())],
    )?;
    params.validate(x.n_cols())?;
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("regression target has non-finite values".into()));
    }
    let mtry = params.resolved_mtry(ForestKind::Regression, x.n_cols());
    let trees = fit_trees(x, &RegressionRule { y: target }, clusters, params, mtry)?;
    Ok(Forest::assemble(
        ForestKind::Regression,
        params,
        mtry,
        feature_names,
        trees,
        x.clone(),
        target.to_vec(),
        None,
        Vec::new(),
    ))
}

/// Honest causal forest of residualized outcome on residualized treatment.
pub fn fit_causal_forest(
    x: &FeatureMatrix,
    feature_names: &[String],
    y_resid: &[f64],
    w_resid: &[f64],
    clusters: &[usize],
    params: &ForestParams,
) -> Result<Forest> {
    check_inputs(
        x,
        feature_names,
        &[
            ("outcome residuals", y_resid.len()),
            ("treatment residuals", w_resid.len()),
            ("clusters", clusters.len()),
        ],
    )?;
    params.validate(x.n_cols())?;
    if y_resid.iter().chain(w_resid).any(|v| !v.is_finite()) {
        return Err(Error::Data("residuals contain non-finite values".into()));
    }
    if w_resid.iter().all(|&w| w == w_resid[0]) {
        return Err(Error::Estimation("treatment residuals do not vary".into()));
    }
    let mut warnings = Vec::new();
    let all_constant = (0..x.n_cols()).all(|c| {
        let v0 = x.get(0, c);
        (0..x.n_rows()).all(|r| x.get(r, c) == v0)
    });
    if all_constant {
        warnings.push("all effect modifiers are constant; every tree is a single leaf".into());
    }
    let pivot = y_resid[0];
    let y: Vec<f64> = y_resid.iter().map(|v| v - pivot).collect();
    let mtry = params.resolved_mtry(ForestKind::Causal, x.n_cols());
    let rule = CausalRule { y: &y, w: w_resid };
    let trees = fit_trees(x, &rule, clusters, params, mtry)?;
    Ok(Forest::assemble(
        ForestKind::Causal,
        params,
        mtry,
        feature_names,
        trees,
        x.clone(),
        y,
        Some(w_resid.to_vec()),
        warnings,
    ))
}

impl Forest {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        kind: ForestKind,
        params: &ForestParams,
        mtry: usize,
        feature_names: &[String],
        trees: Vec<Tree>,
        x: FeatureMatrix,
        outcome: Vec<f64>,
        treatment: Option<Vec<f64>>,
        warnings: Vec<String>,
    ) -> Self {
        let mut forest = Forest {
            kind,
            params: params.clone(),
            mtry,
            feature_names: feature_names.to_vec(),
            schema_fingerprint: schema_fingerprint(feature_names),
            trees,
            x,
            outcome,
            treatment,
            warnings,
            leaves: Vec::new(),
        };
        forest.summarize_leaves();
        forest
    }

    fn summarize_leaves(&mut self) {
        let y = &self.outcome;
        let w = self.treatment.as_deref();
        self.leaves = self
            .trees
            .iter()
            .map(|t| {
                t.nodes
                    .iter()
                    .map(|node| match node {
                        Node::Leaf { rows } if !rows.is_empty() => {
                            let n = rows.len() as f64;
                            let mut s = LeafSummary::default();
                            for &r in rows {
                                let yr = y[r as usize];
                                let wr = w.map_or(0.0, |w| w[r as usize]);
                                s.y += yr;
                                s.w += wr;
                                s.ww += wr * wr;
                                s.wy += wr * yr;
                            }
                            LeafSummary {
                                w: s.w / n,
                                y: s.y / n,
                                ww: s.ww / n,
                                wy: s.wy / n,
                            }
                        }
                        _ => LeafSummary::default(),
                    })
                    .collect()
            })
            .collect();
    }

    pub fn n_training_rows(&self) -> usize {
        self.x.n_rows()
    }

    pub fn training_features(&self) -> &FeatureMatrix {
        &self.x
    }

    fn check_query(&self, query: &FeatureMatrix) -> Result<()> {
        if query.n_cols() != self.x.n_cols() {
            return Err(Error::Data(format!(
                "query has {} features, forest was trained on {}",
                query.n_cols(),
                self.x.n_cols()
            )));
        }
        Ok(())
    }

    /// `(tree index, leaf node)` pairs for a query, skipping trees whose
    /// subsample contains `exclude`. Falls back to all trees when none
    /// remain; the flag reports that.
    fn leaves_for(&self, x: &[f64], exclude: Option<u32>) -> (Vec<(usize, usize)>, bool) {
        let pick = |skip: Option<u32>| -> Vec<(usize, usize)> {
            self.trees
                .iter()
                .enumerate()
                .filter(|(_, t)| skip.is_none_or(|r| !t.contains(r)))
                .map(|(i, t)| (i, t.leaf_of(x)))
                .collect()
        };
        let found = pick(exclude);
        if found.is_empty() && exclude.is_some() {
            (pick(None), true)
        } else {
            (found, false)
        }
    }

    /// Forest kernel weights `a_i(x)` over training rows.
    pub fn kernel_weights(&self, x: &[f64], exclude: Option<u32>) -> Vec<f64> {
        let mut alpha = vec![0.0; self.x.n_rows()];
        let (leaves, _) = self.leaves_for(x, exclude);
        let used: Vec<&[u32]> = leaves
            .iter()
            .map(|&(t, l)| self.trees[t].leaf_rows(l))
            .filter(|rows| !rows.is_empty())
            .collect();
        if used.is_empty() {
            return alpha;
        }
        let b = used.len() as f64;
        for rows in used {
            let share = 1.0 / (rows.len() as f64 * b);
            for &r in rows {
                alpha[r as usize] += share;
            }
        }
        alpha
    }

    fn regression_value(&self, x: &[f64], exclude: Option<u32>) -> (f64, bool) {
        let (leaves, fallback) = self.leaves_for(x, exclude);
        let total: f64 = leaves.iter().map(|&(t, l)| self.leaves[t][l].y).sum();
        (total / leaves.len() as f64, fallback)
    }

    pub fn predict(&self, query: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_query(query)?;
        Ok(self.map_rows(query.n_rows(), |r| self.regression_value(query.row(r), None).0))
    }

    /// Out-of-bag predictions for the training rows: each row averages only
    /// trees whose subsample excluded its cluster.
    pub fn predict_out_of_bag(&self) -> OobPredictions {
        let pairs = self.map_rows(self.x.n_rows(), |r| {
            self.regression_value(self.x.row(r), Some(r as u32))
        });
        OobPredictions {
            values: pairs.iter().map(|p| p.0).collect(),
            fallback_rows: pairs
                .iter()
                .enumerate()
                .filter(|(_, p)| p.1)
                .map(|(i, _)| i)
                .collect(),
        }
    }

    fn effect(&self, x: &[f64], exclude: Option<u32>) -> EffectPrediction {
        let (leaves, fallback) = self.leaves_for(x, exclude);
        let b = leaves.len() as f64;
        let (mut w, mut y, mut ww, mut wy) = (0.0, 0.0, 0.0, 0.0);
        for &(t, l) in &leaves {
            let s = &self.leaves[t][l];
            w += s.w;
            y += s.y;
            ww += s.ww;
            wy += s.wy;
        }
        let (w_bar, y_bar, ww_bar, wy_bar) = (w / b, y / b, ww / b, wy / b);
        let denom = ww_bar - w_bar * w_bar;
        let num = wy_bar - w_bar * y_bar;
        let mut out = EffectPrediction {
            tau: None,
            variance: None,
            treatment_variance: denom.max(0.0),
            oob_fallback: fallback,
        };
        if !(denom > 1e-12 * ww_bar) {
            return out;
        }
        let tau = num / denom;
        out.tau = Some(tau);

        let group = self.params.ci_group_size;
        if group < 2 {
            return out;
        }
        // Linearized estimating equation per tree, evaluated at the forest
        // solution.
        let psi = |s: &LeafSummary| {
            let cov = s.wy - w_bar * s.y - y_bar * s.w + w_bar * y_bar;
            let var = s.ww - 2.0 * w_bar * s.w + w_bar * w_bar;
            cov - tau * var
        };
        let mut tree_psi = Vec::new();
        let mut group_psi = Vec::new();
        let mut i = 0;
        while i < leaves.len() {
            let g = leaves[i].0 / group;
            let members: Vec<_> = leaves[i..]
                .iter()
                .take_while(|(t, _)| t / group == g)
                .collect();
            i += members.len();
            let complete = members.len() == group && (g + 1) * group <= self.trees.len();
            if !complete {
                continue;
            }
            let values: Vec<f64> = members
                .iter()
                .map(|&&(t, l)| psi(&self.leaves[t][l]))
                .collect();
            group_psi.push(stats::mean(&values));
            tree_psi.extend(values);
        }
        if group_psi.len() < 2 {
            return out;
        }
        let center = stats::mean(&tree_psi);
        let var_between = group_psi.iter().map(|p| (p - center).powi(2)).sum::<f64>()
            / group_psi.len() as f64;
        let var_total =
            tree_psi.iter().map(|p| (p - center).powi(2)).sum::<f64>() / tree_psi.len() as f64;
        let group_noise = (var_total - var_between) / (group - 1) as f64;
        let debiased = bayes_debias(var_between, group_noise, group_psi.len() as f64);
        out.variance = Some(debiased / (denom * denom));
        out
    }

    /// Effect estimates for new points, using every tree.
    pub fn predict_effects(&self, query: &FeatureMatrix) -> Result<Vec<EffectPrediction>> {
        self.require_causal()?;
        self.check_query(query)?;
        Ok(self.map_rows(query.n_rows(), |r| self.effect(query.row(r), None)))
    }

    /// Out-of-bag effect estimates for the training rows.
    pub fn predict_effects_oob(&self) -> Result<Vec<EffectPrediction>> {
        self.require_causal()?;
        Ok(self.map_rows(self.x.n_rows(), |r| self.effect(self.x.row(r), Some(r as u32))))
    }

    fn require_causal(&self) -> Result<()> {
        if self.kind != ForestKind::Causal {
            return Err(Error::Estimation("effect prediction needs a causal forest".into()));
        }
        Ok(())
    }

    fn map_rows<T: Send, F: Fn(usize) -> T + Sync + Send>(&self, n: usize, f: F) -> Vec<T> {
        #[cfg(feature = "parallel")]
        {
            (0..n).into_par_iter().map(f).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..n).map(f).collect()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Data(format!("forest serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut forest: Forest = serde_json::from_str(text)
            .map_err(|e| Error::Data(format!("forest deserialization: {e}")))?;
        if forest.schema_fingerprint != schema_fingerprint(&forest.feature_names) {
            return Err(Error::Data("forest schema fingerprint does not match its features".into()));
        }
        forest.summarize_leaves();
        Ok(forest)
    }
}

/// Shrinks `var_between - group_noise` towards positivity with a flat-prior
/// posterior mean, as in the little-bags construction.
fn bayes_debias(var_between: f64, group_noise: f64, n_groups: f64) -> f64 {
    let initial = var_between - group_noise;
    let se = var_between.max(group_noise) * (2.0 / n_groups).sqrt();
    if !(se > 0.0) {
        return initial.max(0.0);
    }
    let ratio = initial / se;
    let density = (-ratio * ratio / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mass = 0.5 * statrs::function::erf::erfc(-ratio / std::f64::consts::SQRT_2);
    initial + se * density / mass
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn single_leaf_ratio() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![0.0]]).unwrap();
        let mut forest = fit_causal_forest(
            &x,
            &names(1),
            &[1.0, -1.0],
            &[1.0, -1.0],
            &[0, 1],
            &ForestParams {
                num_trees: 1,
                ci_group_size: 1,
                sample_fraction: 1.0,
                min_node_size: 1,
                ..Default::default()
            },
        )
        .unwrap();
        // Replace the honest half-split with a single leaf holding both rows.
        forest.trees[0] = Tree {
            nodes: vec![Node::Leaf { rows: vec![0, 1] }],
            split_rows: vec![],
            estimation_rows: vec![0, 1],
        };
        forest.summarize_leaves();
        let p = forest.predict_effects(&x).unwrap();
        assert_eq!(p[0].tau, Some(1.0));
    }

    #[test]
    fn params_validation() {
        let p = ForestParams::default();
        assert!(p.validate(3).is_ok());
        assert!(ForestParams { num_trees: 0, ..p.clone() }.validate(3).is_err());
        assert!(ForestParams { honesty_fraction: 1.0, ..p.clone() }.validate(3).is_err());
        assert!(ForestParams { mtry: Some(4), ..p.clone() }.validate(3).is_err());
        assert!(ForestParams { min_node_size: 0, ..p }.validate(3).is_err());
    }

    #[test]
    fn default_mtry() {
        let p = ForestParams::default();
        assert_eq!(p.resolved_mtry(ForestKind::Regression, 10), 4);
        assert_eq!(p.resolved_mtry(ForestKind::Causal, 5), 5);
        assert_eq!(p.resolved_mtry(ForestKind::Causal, 100), 30);
    }

    #[test]
    fn debias_is_positive() {
        assert!(bayes_debias(1.0, 2.0, 100.0) > 0.0);
        assert!((bayes_debias(10.0, 1.0, 1e6) - 9.0).abs() < 1e-6);
    }
}
