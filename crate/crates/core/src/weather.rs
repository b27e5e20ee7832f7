//! Standardized precipitation-evapotranspiration index (SPEI) and its
//! growing-season aggregation.
//!
//! The monthly water balance `D = P - PET` is mapped through a fitted
//! three-parameter log-logistic CDF and then through the standard normal
//! quantile function. Monthly values are averaged over the crop-calendar
//! months that fall between two interviews, optionally with the sign flipped
//! so that larger values mean drier conditions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Lower and upper clamp applied to the fitted CDF before the normal
/// quantile; SPEI saturates near +/-4.75.
pub const CDF_CLAMP: f64 = 1e-6;

/// Smallest reference sample accepted by [`fit_reference_distribution`].
pub const MIN_REFERENCE_LEN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Data(format!("month {month} out of range 1-12")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            YearMonth {
                year: self.year + 1,
                month: 1,
            }
        } else {
            YearMonth {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    fn mid_month(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 15).expect("the 15th always exists")
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthlyWaterBalance {
    pub month: YearMonth,
    pub precipitation: f64,
    pub pet: f64,
    pub balance: f64,
}

/// Elementwise `D = P - PET` over aligned monthly series.
pub fn compute_water_balance(
    months: &[YearMonth],
    precipitation: &[f64],
    pet: &[f64],
) -> Result<Vec<MonthlyWaterBalance>> {
    if months.len() != precipitation.len() || precipitation.len() != pet.len() {
        return Err(Error::Data(format!(
            "series length mismatch: {} months, {} P values, {} PET values",
            months.len(),
            precipitation.len(),
            pet.len()
        )));
    }
    months
        .iter()
        .zip(precipitation.iter().zip(pet))
        .map(|(&month, (&p, &e))| {
            if !(p >= 0.0) || !(e >= 0.0) {
                return Err(Error::Data(format!(
                    "negative or missing P/PET at {month}: P={p}, PET={e}"
                )));
            }
            Ok(MonthlyWaterBalance {
                month,
                precipitation: p,
                pet: e,
                balance: p - e,
            })
        })
        .collect()
}

/// Three-parameter log-logistic distribution,
/// `F(x) = 1 / (1 + (scale / (x - origin))^shape)` on `(origin, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogistic {
    pub shape: f64,
    pub scale: f64,
    pub origin: f64,
}

impl LogLogistic {
    pub fn new(shape: f64, scale: f64, origin: f64) -> Result<Self> {
        if !(shape > 0.0) || !(scale > 0.0) || !origin.is_finite() {
            return Err(Error::Estimation(format!(
                "invalid log-logistic parameters: shape={shape}, scale={scale}, origin={origin}"
            )));
        }
        Ok(LogLogistic {
            shape,
            scale,
            origin,
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.origin {
            return 0.0;
        }
        1.0 / (1.0 + (self.scale / (x - self.origin)).powf(self.shape))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.origin + self.scale * (p / (1.0 - p)).powf(1.0 / self.shape)
    }

    pub fn median(&self) -> f64 {
        self.origin + self.scale
    }
}

/// Fitted reference distribution for one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeiModel {
    pub distribution: LogLogistic,
    pub n_reference: usize,
}

/// Fits a log-logistic distribution to a reference water-balance sample by
/// unbiased probability-weighted moments.
pub fn fit_reference_distribution(balance: &[f64]) -> Result<SpeiModel> {
    let n = balance.len();
    if n < MIN_REFERENCE_LEN {
        return Err(Error::Data(format!(
            "reference period has {n} values, need at least {MIN_REFERENCE_LEN}"
        )));
    }
    if balance.iter().any(|d| !d.is_finite()) {
        return Err(Error::Data("reference series contains non-finite values".into()));
    }
    let mut sorted = balance.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[n - 1] {
        return Err(Error::Data("reference series is constant".into()));
    }

    // w_s = E[X (1 - F)^s], estimated without bias from order statistics.
    let nf = n as f64;
    let (mut w0, mut w1, mut w2) = (0.0, 0.0, 0.0);
    for (i, &x) in sorted.iter().enumerate() {
        let above = (n - 1 - i) as f64;
        w0 += x;
        w1 += x * above / (nf - 1.0);
        w2 += x * above * (above - 1.0) / ((nf - 1.0) * (nf - 2.0));
    }
    w0 /= nf;
    w1 /= nf;
    w2 /= nf;

    let shape = (2.0 * w1 - w0) / (6.0 * w1 - w0 - 6.0 * w2);
    if !(shape > 1.0) {
        return Err(Error::Estimation(format!(
            "probability-weighted moments give shape {shape}; a finite-mean log-logistic needs shape > 1"
        )));
    }
    let g = gamma(1.0 + 1.0 / shape) * gamma(1.0 - 1.0 / shape);
    let scale = (w0 - 2.0 * w1) * shape / g;
    let mut origin = w0 - scale * g;
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    if origin >= lo {
        origin = lo - 1e-6 * (hi - lo);
    }
    Ok(SpeiModel {
        distribution: LogLogistic::new(shape, scale, origin)?,
        n_reference: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardized {
    pub spei: f64,
    /// The fitted CDF was clamped (value at or beyond the support edge).
    pub clamped: bool,
}

/// `spei = Phi^-1(F(D))`.
pub fn standardize_to_spei(balance: f64, model: &SpeiModel) -> Standardized {
    let p = model.distribution.cdf(balance);
    let clamped = !(CDF_CLAMP..=1.0 - CDF_CLAMP).contains(&p);
    let p = p.clamp(CDF_CLAMP, 1.0 - CDF_CLAMP);
    Standardized {
        spei: standard_normal().inverse_cdf(p),
        clamped,
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Calendar months inside a crop calendar that lie between two interviews.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowingSeasonWindow {
    pub months: Vec<YearMonth>,
}

impl GrowingSeasonWindow {
    /// A month belongs to the window when its 15th falls strictly between
    /// the two interview dates and the month is a growing month.
    pub fn between(previous: NaiveDate, current: NaiveDate, growing_months: &[u32]) -> Result<Self> {
        if current <= previous {
            return Err(Error::Data(format!(
                "interview dates out of order: {previous} then {current}"
            )));
        }
        let mut months = Vec::new();
        let mut ym = YearMonth {
            year: previous.year(),
            month: previous.month(),
        };
        let last = YearMonth {
            year: current.year(),
            month: current.month(),
        };
        while ym <= last {
            let mid = ym.mid_month();
            if mid > previous && mid < current && growing_months.contains(&ym.month) {
                months.push(ym);
            }
            ym = ym.next();
        }
        if months.is_empty() {
            return Err(Error::Data(format!(
                "no growing-season month between {previous} and {current}"
            )));
        }
        Ok(GrowingSeasonWindow { months })
    }
}

/// Mean monthly SPEI over the window, negated when `reversed`.
pub fn aggregate_growing_season(
    spei: &BTreeMap<YearMonth, f64>,
    window: &GrowingSeasonWindow,
    reversed: bool,
) -> Result<f64> {
    if window.months.is_empty() {
        return Err(Error::Data("empty growing-season window".into()));
    }
    let mut total = 0.0;
    for m in &window.months {
        total += spei
            .get(m)
            .ok_or_else(|| Error::Data(format!("no SPEI value for {m}")))?;
    }
    let mean = total / window.months.len() as f64;
    Ok(if reversed { -mean } else { mean })
}

/// Inclusive range of years used to fit the reference distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferencePeriod {
    pub start_year: i32,
    pub end_year: i32,
}

impl Default for ReferencePeriod {
    fn default() -> Self {
        ReferencePeriod {
            start_year: 1901,
            end_year: 2020,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct GridCell {
    lon: f64,
    lat: f64,
    spei: BTreeMap<YearMonth, f64>,
}

/// Monthly SPEI per grid cell, either computed from P and PET or read
/// precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimateGrid {
    cells: BTreeMap<String, GridCell>,
    /// Number of months whose CDF had to be clamped.
    pub clamped_months: usize,
}

#[derive(Debug, Deserialize)]
struct ClimateRecord {
    cell_id: String,
    year: i32,
    month: u32,
    lon: f64,
    lat: f64,
    #[serde(rename = "P_mm")]
    p_mm: Option<f64>,
    #[serde(rename = "PET_mm")]
    pet_mm: Option<f64>,
    spei: Option<f64>,
}

/// Coordinates and monthly `(P, PET, spei)` cells as read.
type RawCell = (f64, f64, BTreeMap<YearMonth, (Option<f64>, Option<f64>, Option<f64>)>);

impl ClimateGrid {
    /// Reads `cell_id, year, month, lon, lat` plus either `P_mm, PET_mm` or
    /// a precomputed `spei` column. In water-balance mode one reference
    /// distribution is fitted per cell and calendar month.
    pub fn from_reader(reader: impl std::io::Read, reference: ReferencePeriod) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut raw: BTreeMap<String, RawCell> = BTreeMap::new();
        for rec in rdr.deserialize() {
            let rec: ClimateRecord = rec?;
            let ym = YearMonth::new(rec.year, rec.month)?;
            let entry = raw
                .entry(rec.cell_id.clone())
                .or_insert_with(|| (rec.lon, rec.lat, BTreeMap::new()));
            if entry.2.insert(ym, (rec.p_mm, rec.pet_mm, rec.spei)).is_some() {
                return Err(Error::Data(format!(
                    "duplicate climate record for cell `{}` at {ym}",
                    rec.cell_id
                )));
            }
        }
        if raw.is_empty() {
            return Err(Error::Data("climate table is empty".into()));
        }

        let mut cells = BTreeMap::new();
        let mut clamped_months = 0;
        for (id, (lon, lat, series)) in raw {
            let precomputed = series.values().all(|v| v.2.is_some());
            let spei = if precomputed {
                series.iter().map(|(&m, v)| (m, v.2.unwrap())).collect()
            } else {
                let months: Vec<YearMonth> = series.keys().copied().collect();
                let mut p = Vec::with_capacity(months.len());
                let mut e = Vec::with_capacity(months.len());
                for (m, v) in &series {
                    match (v.0, v.1) {
                        (Some(pp), Some(ee)) => {
                            p.push(pp);
                            e.push(ee);
                        }
                        _ => {
                            return Err(Error::Data(format!(
                                "cell `{id}` at {m}: need either spei or both P_mm and PET_mm"
                            )))
                        }
                    }
                }
                let balance = compute_water_balance(&months, &p, &e)?;
                let (spei, clamped) = spei_by_calendar_month(&balance, reference)
                    .map_err(|err| Error::Data(format!("cell `{id}`: {err}")))?;
                clamped_months += clamped;
                spei
            };
            cells.insert(id, GridCell { lon, lat, spei });
        }
        Ok(ClimateGrid {
            cells,
            clamped_months,
        })
    }

    pub fn load(path: impl AsRef<Path>, reference: ReferencePeriod) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, reference)
    }

    /// Cell whose centre is nearest (squared lon/lat distance; ties go to
    /// the lexicographically first id).
    pub fn nearest_cell(&self, lon: f64, lat: f64) -> &str {
        let mut best: Option<(&str, f64)> = None;
        for (id, c) in &self.cells {
            let d = (c.lon - lon).powi(2) + (c.lat - lat).powi(2);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((id, d));
            }
        }
        best.expect("grid is non-empty").0
    }

    pub fn monthly_spei(&self, cell: &str) -> Option<&BTreeMap<YearMonth, f64>> {
        self.cells.get(cell).map(|c| &c.spei)
    }
}

/// Standardizes a water-balance series month by month, fitting one
/// reference distribution per calendar month. Returns the SPEI series and
/// the number of clamped months.
pub fn spei_by_calendar_month(
    balance: &[MonthlyWaterBalance],
    reference: ReferencePeriod,
) -> Result<(BTreeMap<YearMonth, f64>, usize)> {
    let mut models = HashMap::new();
    for month in 1..=12u32 {
        let sample: Vec<f64> = balance
            .iter()
            .filter(|b| {
                b.month.month == month
                    && (reference.start_year..=reference.end_year).contains(&b.month.year)
            })
            .map(|b| b.balance)
            .collect();
        if sample.is_empty() {
            continue;
        }
        models.insert(month, fit_reference_distribution(&sample)?);
    }
    let mut clamped = 0;
    let mut out = BTreeMap::new();
    for b in balance {
        let model = models.get(&b.month.month).ok_or_else(|| {
            Error::Data(format!(
                "calendar month {} has no data in the reference period",
                b.month.month
            ))
        })?;
        let s = standardize_to_spei(b.balance, model);
        clamped += usize::from(s.clamped);
        out.insert(b.month, s.spei);
    }
    Ok((out, clamped))
}

/// One household interval to be matched to the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdWindow {
    pub unit_id: String,
    pub wave: i64,
    pub prev_interview_date: NaiveDate,
    pub curr_interview_date: NaiveDate,
    pub region: String,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowingSeasonTreatment {
    pub unit_id: String,
    pub wave: i64,
    pub cell_id: String,
    pub n_months: usize,
    pub gs_spei: f64,
}

pub fn read_household_windows(reader: impl std::io::Read) -> Result<Vec<HouseholdWindow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Growing-season SPEI for every household interval. Regions missing from
/// `calendar` use its `"*"` entry when present.
pub fn growing_season_treatments(
    grid: &ClimateGrid,
    windows: &[HouseholdWindow],
    calendar: &BTreeMap<String, Vec<u32>>,
    reversed: bool,
) -> Result<Vec<GrowingSeasonTreatment>> {
    windows
        .iter()
        .map(|hw| {
            let months = calendar.get(&hw.region).or_else(|| calendar.get("*")).ok_or_else(|| {
                Error::Config(format!("no crop calendar for region `{}`", hw.region))
            })?;
            let window =
                GrowingSeasonWindow::between(hw.prev_interview_date, hw.curr_interview_date, months)?;
            let cell = grid.nearest_cell(hw.lon, hw.lat);
            let spei = grid.monthly_spei(cell).expect("cell exists");
            let gs = aggregate_growing_season(spei, &window, reversed).map_err(|e| {
                Error::Data(format!("unit `{}` wave {}: {e}", hw.unit_id, hw.wave))
            })?;
            Ok(GrowingSeasonTreatment {
                unit_id: hw.unit_id.clone(),
                wave: hw.wave,
                cell_id: cell.to_owned(),
                n_months: window.months.len(),
                gs_spei: gs,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ym(y: i32, m: u32) -> YearMonth {
        YearMonth::new(y, m).unwrap()
    }

    #[test]
    fn water_balance_examples() {
        let months = [ym(2000, 1), ym(2000, 2)];
        let wb = compute_water_balance(&months, &[100.0, 80.0], &[100.0, 120.0]).unwrap();
        assert_eq!(wb[0].balance, 0.0);
        assert_eq!(wb[1].balance, -40.0);
        assert!(compute_water_balance(&months, &[1.0], &[1.0, 2.0]).is_err());
        assert!(compute_water_balance(&months, &[-1.0, 0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn twelve_months_keep_order() {
        let months: Vec<_> = (1..=12).map(|m| ym(2001, m)).collect();
        let p: Vec<f64> = (0..12).map(|i| i as f64 * 10.0).collect();
        let wb = compute_water_balance(&months, &p, &[5.0; 12]).unwrap();
        assert_eq!(wb.len(), 12);
        assert!(wb.windows(2).all(|w| w[0].month < w[1].month && w[0].balance < w[1].balance));
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(fit_reference_distribution(&[3.0; 40]).is_err());
        assert!(fit_reference_distribution(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn median_maps_to_zero() {
        let truth = LogLogistic::new(3.0, 40.0, -30.0).unwrap();
        let d: Vec<f64> = (0..60).map(|i| truth.quantile((i as f64 + 0.5) / 60.0)).collect();
        let model = fit_reference_distribution(&d).unwrap();
        let med = model.distribution.median();
        assert!((model.distribution.cdf(med) - 0.5).abs() < 1e-12);
        assert!(standardize_to_spei(med, &model).spei.abs() < 1e-9);
    }

    #[test]
    fn below_support_is_clamped() {
        let model = SpeiModel {
            distribution: LogLogistic::new(3.0, 10.0, -5.0).unwrap(),
            n_reference: 100,
        };
        let s = standardize_to_spei(-50.0, &model);
        assert!(s.clamped);
        assert!((s.spei + 4.753).abs() < 1e-3);
    }

    #[test]
    fn window_from_interviews() {
        let prev = NaiveDate::from_ymd_opt(2015, 10, 1).unwrap();
        let curr = NaiveDate::from_ymd_opt(2018, 9, 10).unwrap();
        let w = GrowingSeasonWindow::between(prev, curr, &[6, 7, 8, 9]).unwrap();
        let expected: Vec<_> = [2016, 2017]
            .iter()
            .flat_map(|&y| (6..=9).map(move |m| ym(y, m)))
            .chain((6..=8).map(|m| ym(2018, m)))
            .collect();
        assert_eq!(w.months, expected);

        let late = NaiveDate::from_ymd_opt(2018, 9, 20).unwrap();
        let w = GrowingSeasonWindow::between(prev, late, &[6, 7, 8, 9]).unwrap();
        assert_eq!(*w.months.last().unwrap(), ym(2018, 9));
    }

    #[test]
    fn aggregate_and_reverse() {
        let window = GrowingSeasonWindow {
            months: vec![ym(2016, 6), ym(2016, 7)],
        };
        let mut spei = BTreeMap::new();
        spei.insert(ym(2016, 6), 0.5);
        spei.insert(ym(2016, 7), 0.5);
        assert_eq!(aggregate_growing_season(&spei, &window, true).unwrap(), -0.5);
        assert_eq!(aggregate_growing_season(&spei, &window, false).unwrap(), 0.5);
        spei.remove(&ym(2016, 7));
        assert!(aggregate_growing_season(&spei, &window, false).is_err());
        let empty = GrowingSeasonWindow { months: vec![] };
        assert!(aggregate_growing_season(&spei, &empty, false).is_err());
    }
}
