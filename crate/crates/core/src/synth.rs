//! Synthetic household panels with a known effect surface.
//!
//! The effect of the (reversed) growing-season index on the probability of
//! sending a migrant is
//!
//! ```text
//! tau(x) = tau_base
//!        + beta_asset * (2/pi) * atan((asset_lag - asset_low) / asset_scale)
//!        - beta_adapt * (adapt_lag - 50) / 50
//!        + beta_lag * w_lag + beta_lag2 * w_lag^2
//! ```
//!
//! so that households below the asset threshold respond negatively (an
//! immobility trap), higher adaptive capacity dampens the response, and the
//! response is concave in the previous shock when `beta_lag2 < 0`. With
//! `asset_high` set, the asset term vanishes above that level.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Column, ColumnRole, PanelDataset};

/// Largest tolerated share of clipped outcome probabilities.
pub const MAX_CLIP_RATE: f64 = 0.10;

pub const UNIT: &str = "unit_id";
pub const WAVE: &str = "wave";
pub const OUTCOME: &str = "migrant";
pub const TREATMENT: &str = "gs_spei_rev";
pub const ASSET: &str = "asset_index";
pub const ADAPT: &str = "adapt_score";
pub const CONSUMPTION: &str = "log_consumption";
pub const EDUCATION: &str = "tertiary_share";
pub const PRICE_SHOCK: &str = "price_shock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_households: usize,
    /// Waves per household; the first is a baseline without a lag.
    pub waves: usize,
    pub asset_low: f64,
    pub asset_high: Option<f64>,
    pub asset_scale: f64,
    pub tau_base: f64,
    pub beta_asset: f64,
    pub beta_adapt: f64,
    pub beta_lag: f64,
    pub beta_lag2: f64,
    pub base_rate: f64,
    /// Probability-scale noise added before clipping.
    pub noise_sd: f64,
    pub household_effect_sd: f64,
    /// Outcome loading on the time-varying price shock.
    pub confounder_effect: f64,
    pub treatment_mean: f64,
    pub treatment_sd: f64,
    /// Correlation between the treatment and the price shock, in [0, 1).
    pub treatment_confounding: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_households: 2000,
            waves: 3,
            asset_low: 12.0,
            asset_high: None,
            asset_scale: 4.0,
            tau_base: 0.0,
            beta_asset: 0.15,
            beta_adapt: 0.08,
            beta_lag: 0.0,
            beta_lag2: -0.04,
            base_rate: 0.269,
            noise_sd: 0.02,
            household_effect_sd: 0.05,
            confounder_effect: 0.03,
            treatment_mean: 0.229,
            treatment_sd: 0.337,
            treatment_confounding: 0.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_households == 0 || self.waves < 2 {
            return Err(Error::Config(
                "need at least one household and two waves".into(),
            ));
        }
        if !(self.base_rate > 0.0 && self.base_rate < 1.0) {
            return Err(Error::Config(format!(
                "base rate {} must lie in (0, 1)",
                self.base_rate
            )));
        }
        if let Some(high) = self.asset_high {
            if !(self.asset_low < high) {
                return Err(Error::Config("asset_low must be below asset_high".into()));
            }
        }
        if !(0.0..1.0).contains(&self.treatment_confounding) {
            return Err(Error::Config("treatment_confounding must lie in [0, 1)".into()));
        }
        if !(self.asset_scale > 0.0) || !(self.treatment_sd > 0.0) {
            return Err(Error::Config("asset_scale and treatment_sd must be positive".into()));
        }
        Ok(())
    }

    /// Closed-form effect surface.
    pub fn oracle_effect(&self, asset_lag: f64, adapt_lag: f64, w_lag: f64) -> f64 {
        let mut asset_term =
            self.beta_asset * (2.0 / PI) * ((asset_lag - self.asset_low) / self.asset_scale).atan();
        if self.asset_high.is_some_and(|h| asset_lag > h) {
            asset_term = 0.0;
        }
        self.tau_base + asset_term - self.beta_adapt * (adapt_lag - 50.0) / 50.0
            + self.beta_lag * w_lag
            + self.beta_lag2 * w_lag * w_lag
    }

    /// Oracle effects for the rows of a lagged dataset.
    pub fn oracle_effects(&self, lagged: &PanelDataset) -> Result<Vec<f64>> {
        let get = |name: String| {
            lagged.numeric(&name).map_err(|_| {
                Error::Data(format!("oracle needs column `{name}` in the lagged dataset"))
            })
        };
        let asset = get(format!("{ASSET}_lag"))?;
        let adapt = get(format!("{ADAPT}_lag"))?;
        let w_lag = get(format!("{TREATMENT}_lag"))?;
        Ok((0..lagged.n_rows())
            .map(|r| self.oracle_effect(asset[r], adapt[r], w_lag[r]))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub unit_id: String,
    pub wave: i64,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct SynthPanel {
    pub dataset: PanelDataset,
    /// Oracle effect for every row that has a previous wave.
    pub truth: Vec<TruthRow>,
    pub clip_rate: f64,
}

#[derive(Default)]
struct Columns {
    unit: Vec<String>,
    wave: Vec<f64>,
    outcome: Vec<f64>,
    treatment: Vec<f64>,
    asset: Vec<f64>,
    adapt: Vec<f64>,
    consumption: Vec<f64>,
    education: Vec<f64>,
    head_age: Vec<f64>,
    hh_size: Vec<f64>,
    illness: Vec<f64>,
    theft: Vec<f64>,
    price: Vec<f64>,
    region: Vec<String>,
    lon: Vec<f64>,
    lat: Vec<f64>,
}

const REGIONS: [(f64, f64); 6] = [
    (4.0, 12.5),
    (7.5, 11.0),
    (11.0, 11.5),
    (4.5, 8.0),
    (7.5, 6.5),
    (8.5, 9.0),
];

pub fn generate_panel(config: &SynthConfig) -> Result<SynthPanel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let adapt_dist = Beta::new(2.0, 2.0).expect("beta");
    let kappa = config.treatment_confounding;
    let idio = (1.0 - kappa * kappa).sqrt();
    let center_wave = (config.waves as f64 + 1.0) / 2.0;

    let mut c = Columns::default();
    let mut truth = Vec::new();
    let mut clipped = 0usize;

    for h in 0..config.n_households {
        let unit = format!("h{h:05}");
        let region_idx = rng.random_range(0..REGIONS.len());
        let (rlon, rlat) = REGIONS[region_idx];
        let lon = rlon + 0.8 * std_normal.sample(&mut rng);
        let lat = rlat + 0.8 * std_normal.sample(&mut rng);
        let asset_h = (11.0f64.ln() + 0.6 * std_normal.sample(&mut rng)).exp();
        let adapt_h = 100.0 * adapt_dist.sample(&mut rng);
        let educated = rng.random_bool(0.3);
        let edu_h = if educated { rng.random_range(0.1..0.8) } else { 0.0 };
        let age_h = rng.random_range(25.0..65.0f64).floor();
        let size_h = rng.random_range(2..11) as f64;
        let household_effect = config.household_effect_sd * std_normal.sample(&mut rng);

        let mut prev: Option<(f64, f64, f64)> = None;
        for t in 1..=config.waves {
            let asset = (asset_h * (0.1 * std_normal.sample(&mut rng)).exp()).clamp(0.0, 100.0);
            let adapt = (adapt_h + 3.0 * std_normal.sample(&mut rng)).clamp(0.0, 100.0);
            let price = std_normal.sample(&mut rng);
            let w = config.treatment_mean
                + config.treatment_sd * (kappa * price + idio * std_normal.sample(&mut rng));
            let (asset_lag, adapt_lag, w_lag) = prev.unwrap_or((asset, adapt, w));
            let tau = config.oracle_effect(asset_lag, adapt_lag, w_lag);
            if prev.is_some() {
                truth.push(TruthRow {
                    unit_id: unit.clone(),
                    wave: t as i64,
                    tau,
                });
            }
            let p = config.base_rate
                + tau * w
                + config.confounder_effect * price
                + household_effect
                + 0.01 * (t as f64 - center_wave)
                + config.noise_sd * std_normal.sample(&mut rng);
            if !(0.01..=0.99).contains(&p) {
                clipped += 1;
            }
            let p = p.clamp(0.01, 0.99);
            let y = if rng.random_bool(p) { 1.0 } else { 0.0 };

            c.unit.push(unit.clone());
            c.wave.push(t as f64);
            c.outcome.push(y);
            c.treatment.push(w);
            c.asset.push(asset);
            c.adapt.push(adapt);
            c.consumption
                .push(10.0 + 0.03 * asset + 0.3 * std_normal.sample(&mut rng));
            c.education.push(edu_h);
            c.head_age.push(age_h + 3.0 * (t - 1) as f64);
            c.hh_size
                .push((size_h + rng.random_range(-1..=1) as f64).max(1.0));
            c.illness.push(f64::from(u8::from(rng.random_bool(0.1))));
            c.theft.push(f64::from(u8::from(rng.random_bool(0.05))));
            c.price.push(price);
            c.region.push(format!("R{}", region_idx + 1));
            c.lon.push(lon);
            c.lat.push(lat);
            prev = Some((asset, adapt, w));
        }
    }

    let n_rows = c.unit.len();
    let clip_rate = clipped as f64 / n_rows as f64;
    if clip_rate > MAX_CLIP_RATE {
        return Err(Error::Config(format!(
            "{:.1}% of outcome probabilities were clipped (limit {:.0}%); effect sizes are too large",
            100.0 * clip_rate,
            100.0 * MAX_CLIP_RATE
        )));
    }

    use ColumnRole::*;
    let dataset = PanelDataset::from_columns(vec![
        Column::categorical(UNIT, UnitId, c.unit),
        Column::numeric(WAVE, Wave, c.wave),
        Column::numeric(OUTCOME, Outcome, c.outcome),
        Column::numeric(TREATMENT, Treatment, c.treatment),
        Column::numeric(ASSET, Auxiliary, c.asset),
        Column::numeric(ADAPT, Auxiliary, c.adapt),
        Column::numeric(CONSUMPTION, Auxiliary, c.consumption),
        Column::numeric(EDUCATION, Auxiliary, c.education),
        Column::numeric("head_age", Auxiliary, c.head_age),
        Column::numeric("hh_size", Auxiliary, c.hh_size),
        Column::numeric("illness_shock", Auxiliary, c.illness),
        Column::numeric("theft_shock", Auxiliary, c.theft),
        Column::numeric(PRICE_SHOCK, Auxiliary, c.price),
        Column::categorical("region", Auxiliary, c.region),
        Column::numeric("lon", Auxiliary, c.lon),
        Column::numeric("lat", Auxiliary, c.lat),
    ])?;
    Ok(SynthPanel {
        dataset,
        truth,
        clip_rate,
    })
}

/// Truth table as CSV (`unit_id,wave,tau`).
pub fn truth_csv(truth: &[TruthRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in truth {
        w.serialize(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Data(format!("truth csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}
