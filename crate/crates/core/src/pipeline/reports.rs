//! Group-average effect tables over quantile bins of effect modifiers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateBin {
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub modifier: String,
    pub bins: Vec<GateBin>,
}

impl GateReport {
    pub fn max_abs_mean(&self) -> f64 {
        self.bins
            .iter()
            .filter_map(|b| b.mean)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest minus smallest bin mean.
    pub fn spread(&self) -> f64 {
        let means: Vec<f64> = self.bins.iter().filter_map(|b| b.mean).collect();
        let (lo, hi) = stats::min_max(&means);
        if means.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,lower,upper,n,mean_effect_per_sd\n");
        for (i, b) in self.bins.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                b.lower,
                b.upper,
                b.n,
                b.mean.map_or(String::new(), |m| m.to_string())
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub n: usize,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapReport {
    pub modifier_a: String,
    pub modifier_b: String,
    /// Upper bin edges of each modifier.
    pub edges_a: Vec<f64>,
    pub edges_b: Vec<f64>,
    /// `cells[i][j]`: bin `i` of modifier a, bin `j` of modifier b.
    pub cells: Vec<Vec<HeatCell>>,
}

impl HeatmapReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_a,upper_a,bin_b,upper_b,n,mean_effect_per_sd\n");
        for (i, row) in self.cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    i + 1,
                    self.edges_a[i],
                    j + 1,
                    self.edges_b[j],
                    cell.n,
                    cell.mean.map_or(String::new(), |m| m.to_string())
                ));
            }
        }
        out
    }
}

/// Quantile bins: upper edges at the `j/k` quantiles (linear interpolation),
/// duplicates collapsed. Bin `j` holds values in `(upper[j-1], upper[j]]`,
/// the first bin everything up to `upper[0]`. Returns the distinct upper
/// edges and each value's bin.
pub fn quantile_bins(values: &[f64], k: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {k}")));
    }
    if values.is_empty() {
        return Err(Error::Data("no values to bin".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Data(
            "modifier is constant; skip it for group-average effects".into(),
        ));
    }
    let mut upper: Vec<f64> = (1..=k)
        .map(|j| stats::quantile_sorted(&sorted, j as f64 / k as f64))
        .collect();
    upper.dedup();
    let assignment = values
        .iter()
        .map(|v| upper.partition_point(|e| e < v).min(upper.len() - 1))
        .collect();
    Ok((upper, assignment))
}

/// Mean effect per quantile bin of a modifier.
pub fn group_average_effects(
    modifier: &str,
    modifier_values: &[f64],
    effects: &[f64],
    k: usize,
) -> Result<GateReport> {
    if modifier_values.len() != effects.len() {
        return Err(Error::Data("modifier and effects differ in length".into()));
    }
    let (upper, assignment) = quantile_bins(modifier_values, k)
        .map_err(|e| Error::Data(format!("modifier `{modifier}`: {e}")))?;
    let mut sums = vec![0.0; upper.len()];
    let mut counts = vec![0usize; upper.len()];
    for (&b, &e) in assignment.iter().zip(effects) {
        sums[b] += e;
        counts[b] += 1;
    }
    let min = stats::min_max(modifier_values).0;
    let bins = (0..upper.len())
        .map(|b| GateBin {
            lower: if b == 0 { min } else { upper[b - 1] },
            upper: upper[b],
            n: counts[b],
            mean: (counts[b] > 0).then(|| sums[b] / counts[b] as f64),
        })
        .collect();
    Ok(GateReport {
        modifier: modifier.to_owned(),
        bins,
    })
}

/// Mean effect over the quartile grid of two modifiers.
pub fn effect_heatmap(
    names: (&str, &str),
    a: &[f64],
    b: &[f64],
    effects: &[f64],
) -> Result<HeatmapReport> {
    if a.len() != effects.len() || b.len() != effects.len() {
        return Err(Error::Data("heatmap inputs differ in length".into()));
    }
    let (edges_a, bins_a) =
        quantile_bins(a, 4).map_err(|e| Error::Data(format!("modifier `{}`: {e}", names.0)))?;
    let (edges_b, bins_b) =
        quantile_bins(b, 4).map_err(|e| Error::Data(format!("modifier `{}`: {e}", names.1)))?;
    let mut sums = vec![vec![0.0; edges_b.len()]; edges_a.len()];
    let mut counts = vec![vec![0usize; edges_b.len()]; edges_a.len()];
    for ((&i, &j), &e) in bins_a.iter().zip(&bins_b).zip(effects) {
        sums[i][j] += e;
        counts[i][j] += 1;
    }
    let cells = sums
        .iter()
        .zip(&counts)
        .map(|(srow, crow)| {
            srow.iter()
                .zip(crow)
                .map(|(&s, &n)| HeatCell {
                    n,
                    mean: (n > 0).then(|| s / n as f64),
                })
                .collect()
        })
        .collect();
    Ok(HeatmapReport {
        modifier_a: names.0.to_owned(),
        modifier_b: names.1.to_owned(),
        edges_a,
        edges_b,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_deciles_are_balanced() {
        let v: Vec<f64> = (0..1003).map(|i| i as f64 * 0.37).collect();
        let e = vec![1.0; v.len()];
        let r = group_average_effects("m", &v, &e, 10).unwrap();
        assert_eq!(r.bins.len(), 10);
        let sizes: Vec<usize> = r.bins.iter().map(|b| b.n).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1, "{sizes:?}");
    }

    #[test]
    fn zero_inflated_collapses_to_three_bins() {
        // 85% zeros: quantiles up to 0.8 are zero, leaving 0.9 and 1.0.
        let mut v = vec![0.0; 85];
        v.extend((0..15).map(|i| 0.1 + i as f64 * 0.01));
        let e = vec![0.0; v.len()];
        let r = group_average_effects("edu", &v, &e, 10).unwrap();
        assert_eq!(r.bins.len(), 3);
        assert_eq!(r.bins[0].n, 85);
    }

    #[test]
    fn constant_modifier_is_an_error() {
        assert!(group_average_effects("c", &[1.0; 10], &[0.0; 10], 10).is_err());
    }

    #[test]
    fn constant_effect_everywhere() {
        let v: Vec<f64> = (0..50).map(|i| (i * 7 % 13) as f64).collect();
        let r = group_average_effects("m", &v, &vec![0.25; 50], 10).unwrap();
        assert!(r.bins.iter().all(|b| b.mean == Some(0.25)));
    }

    #[test]
    fn heatmap_partitions_rows() {
        let a: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..101).map(|i| ((i * 37) % 101) as f64).collect();
        let h = effect_heatmap(("a", "b"), &a, &b, &vec![0.5; 101]).unwrap();
        let total: usize = h.cells.iter().flatten().map(|c| c.n).sum();
        assert_eq!(total, 101);
        assert!(h
            .cells
            .iter()
            .flatten()
            .all(|c| c.mean.is_none() || c.mean == Some(0.5)));
    }
}
