//! Pipeline configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::panel::{ColumnRole, RoleMap};
use crate::synth::{self, SynthConfig};
use crate::weather::ReferencePeriod;

/// Means encoding of a categorical column, used as a fixed-effect
/// representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedEffects {
    pub column: String,
    /// Numeric columns whose within-level means form the encoding. Keep the
    /// outcome and treatment out: a row's own value leaks into its nuisance
    /// prediction and biases the residual-on-residual slope.
    pub over: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    /// Candidate minimum leaf sizes for the causal forest.
    pub min_node_size: Vec<usize>,
    /// Candidate minimum leaf sizes for the two nuisance forests.
    pub nuisance_min_node_size: Vec<usize>,
    /// Trees per candidate while tuning.
    pub num_trees: usize,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            min_node_size: Vec::new(),
            nuisance_min_node_size: Vec::new(),
            num_trees: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeiConfig {
    pub climate: Option<PathBuf>,
    pub households: Option<PathBuf>,
    pub reference: ReferencePeriod,
    /// Growing months per region; `"*"` applies to regions not listed.
    pub growing_months: BTreeMap<String, Vec<u32>>,
    /// Report `-SPEI` so that positive values mean drier.
    pub reversed: bool,
}

impl Default for SpeiConfig {
    fn default() -> Self {
        SpeiConfig {
            climate: None,
            households: None,
            reference: ReferencePeriod::default(),
            growing_months: BTreeMap::from([("*".to_owned(), vec![5, 6, 7, 8, 9, 10])]),
            reversed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSpec {
    pub name: String,
    pub items: Vec<String>,
    /// Waves whose rows enter the fit; all rows when empty.
    #[serde(default)]
    pub fit_waves: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: Option<PathBuf>,
    pub roles: RoleMap,
    /// Columns replaced by their value at the household's previous wave.
    pub lag: Vec<String>,
    pub modifiers: Vec<String>,
    /// Numeric confounders used as they are.
    pub confounders: Vec<String>,
    /// Categorical columns entering the confounders as indicator columns.
    pub dummies: Vec<String>,
    /// Indicator columns per wave as a non-parametric time trend.
    pub wave_dummies: bool,
    pub fixed_effects: Option<FixedEffects>,
    pub forest: ForestParams,
    pub nuisance_forest: ForestParams,
    pub tuning: TuningConfig,
    pub gate_bins: usize,
    /// Modifier pairs for quartile heatmaps.
    pub heatmaps: Vec<(String, String)>,
    pub placebo_seed: Option<u64>,
    pub spei: SpeiConfig,
    pub indices: Vec<IndexSpec>,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let roles = RoleMap::from([
            (synth::UNIT.to_owned(), ColumnRole::UnitId),
            (synth::WAVE.to_owned(), ColumnRole::Wave),
            (synth::OUTCOME.to_owned(), ColumnRole::Outcome),
            (synth::TREATMENT.to_owned(), ColumnRole::Treatment),
        ]);
        let lagged = [
            synth::ASSET,
            synth::ADAPT,
            synth::CONSUMPTION,
            synth::EDUCATION,
            synth::TREATMENT,
            "head_age",
            "hh_size",
        ];
        let modifiers: Vec<String> = [
            synth::ASSET,
            synth::TREATMENT,
            synth::ADAPT,
            synth::CONSUMPTION,
            synth::EDUCATION,
        ]
        .iter()
        .map(|c| format!("{c}_lag"))
        .collect();
        PipelineConfig {
            data: None,
            roles,
            lag: lagged.iter().map(|c| c.to_string()).collect(),
            confounders: [
                "lon",
                "lat",
                "illness_shock",
                "theft_shock",
                synth::PRICE_SHOCK,
                "head_age_lag",
                "hh_size_lag",
            ]
            .iter()
            .map(|c| c.to_string())
            .collect(),
            dummies: vec!["region".to_owned()],
            wave_dummies: true,
            fixed_effects: Some(FixedEffects {
                column: synth::UNIT.to_owned(),
                over: modifiers.clone(),
            }),
            heatmaps: vec![(format!("{}_lag", synth::ASSET), format!("{}_lag", synth::ADAPT))],
            modifiers,
            forest: ForestParams::default(),
            nuisance_forest: ForestParams {
                num_trees: 500,
                ..ForestParams::default()
            },
            tuning: TuningConfig::default(),
            gate_bins: 10,
            placebo_seed: None,
            spei: SpeiConfig::default(),
            indices: Vec::new(),
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative paths are taken relative to the config file.
        if let Some(dir) = path.parent() {
            let rebase = |p: &mut Option<PathBuf>| {
                if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                    *p = dir.join(&*p);
                }
            };
            rebase(&mut cfg.data);
            rebase(&mut cfg.spei.climate);
            rebase(&mut cfg.spei.households);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Sets the seed of every forest and of the synthetic generator.
    pub fn set_seed(&mut self, seed: u64) {
        self.forest.seed = seed;
        self.nuisance_forest.seed = seed.wrapping_add(1);
        self.synth.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        for role in [
            ColumnRole::Outcome,
            ColumnRole::Treatment,
            ColumnRole::UnitId,
            ColumnRole::Wave,
        ] {
            let n = self.roles.values().filter(|r| **r == role).count();
            if n == 0 {
                return Err(Error::MissingRole(role.to_string()));
            }
            if n > 1 {
                return Err(Error::Config(format!("role `{role}` is assigned to {n} columns")));
            }
        }
        if self.modifiers.is_empty() {
            return Err(Error::Config("at least one effect modifier is required".into()));
        }
        if self.gate_bins < 2 {
            return Err(Error::Config("gate_bins must be at least 2".into()));
        }
        if self.tuning.num_trees == 0 {
            return Err(Error::Config("tuning.num_trees must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn causal_grid(&self) -> Vec<ForestParams> {
        grid(&self.forest, &self.tuning.min_node_size, self.tuning.num_trees)
    }

    pub(crate) fn nuisance_grid(&self) -> Vec<ForestParams> {
        grid(&self.nuisance_forest, &self.tuning.nuisance_min_node_size, self.tuning.num_trees)
    }
}

fn grid(base: &ForestParams, sizes: &[usize], num_trees: usize) -> Vec<ForestParams> {
    if sizes.len() < 2 {
        let mut p = base.clone();
        if let Some(&s) = sizes.first() {
            p.min_node_size = s;
        }
        return vec![p];
    }
    sizes
        .iter()
        .map(|&s| ForestParams {
            min_node_size: s,
            num_trees: num_trees.min(base.num_trees),
            ..base.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn missing_treatment_role_is_named() {
        let mut cfg = PipelineConfig::default();
        cfg.roles.remove(synth::TREATMENT);
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("treatment"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("gate_binz = 3").is_err());
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg = PipelineConfig::from_toml("gate_bins = 5\n[forest]\nnum_trees = 10\n").unwrap();
        assert_eq!(cfg.gate_bins, 5);
        assert_eq!(cfg.forest.num_trees, 10);
        assert_eq!(cfg.modifiers, PipelineConfig::default().modifiers);
    }
}
