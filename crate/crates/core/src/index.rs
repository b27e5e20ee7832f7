//! Composite indices from item lists: first principal component of the item
//! correlation matrix, rescaled to 0-100 over the fitting sample.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::PanelDataset;
use crate::stats;

/// Relative gap under which two leading eigenvalues count as tied.
const EIGEN_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexModel {
    pub items: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub loadings: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

impl IndexModel {
    pub fn fit(ds: &PanelDataset, items: &[String]) -> Result<Self> {
        let columns = items
            .iter()
            .map(|name| ds.numeric(name))
            .collect::<Result<Vec<_>>>()?;
        Self::fit_columns(items, &columns)
    }

    pub fn fit_columns(items: &[String], columns: &[&[f64]]) -> Result<Self> {
        if items.len() < 2 {
            return Err(Error::Data(format!(
                "an index needs at least 2 items, got {}",
                items.len()
            )));
        }
        let n = columns[0].len();
        if n < 2 {
            return Err(Error::Data("an index needs at least 2 rows".into()));
        }
        let mut means = Vec::with_capacity(items.len());
        let mut sds = Vec::with_capacity(items.len());
        for (name, col) in items.iter().zip(columns) {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("item `{name}` has missing values")));
            }
            let sd = stats::sample_sd(col);
            if !(sd > 0.0) {
                return Err(Error::Data(format!("item `{name}` has zero variance")));
            }
            means.push(stats::mean(col));
            sds.push(sd);
        }

        let k = items.len();
        let z = DMatrix::from_fn(n, k, |r, c| (columns[c][r] - means[c]) / sds[c]);
        let corr = (z.transpose() * &z) / (n - 1) as f64;
        let loadings = leading_eigenvector(corr);

        let raw: Vec<f64> = (0..n)
            .map(|r| (0..k).map(|c| loadings[c] * z[(r, c)]).sum())
            .collect();
        let (min, max) = stats::min_max(&raw);
        if !(min < max) {
            return Err(Error::Data("index raw scores do not vary".into()));
        }
        Ok(IndexModel {
            items: items.to_vec(),
            means,
            sds,
            loadings,
            min,
            max,
        })
    }

    pub fn raw_score(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.items.len() {
            return Err(Error::Data(format!(
                "expected {} item values, got {}",
                self.items.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("item `{}` is missing", self.items[i])));
        }
        Ok(values
            .iter()
            .enumerate()
            .map(|(i, v)| self.loadings[i] * (v - self.means[i]) / self.sds[i])
            .sum())
    }

    /// Score rescaled to `[0, 100]`; out-of-sample rows are clamped.
    pub fn score(&self, values: &[f64]) -> Result<f64> {
        let raw = self.raw_score(values)?;
        Ok((100.0 * (raw - self.min) / (self.max - self.min)).clamp(0.0, 100.0))
    }

    pub fn score_dataset(&self, ds: &PanelDataset) -> Result<Vec<f64>> {
        let columns = self
            .items
            .iter()
            .map(|name| ds.numeric(name))
            .collect::<Result<Vec<_>>>()?;
        (0..ds.n_rows())
            .map(|r| {
                let row: Vec<f64> = columns.iter().map(|c| c[r]).collect();
                self.score(&row)
            })
            .collect()
    }
}

/// Unit-norm leading eigenvector with a deterministic choice inside a
/// degenerate leading eigenspace: the direction with the largest loading on
/// the first item (then the second, ...), and signs flipped so the loadings
/// sum to a non-negative value.
fn leading_eigenvector(corr: DMatrix<f64>) -> Vec<f64> {
    let k = corr.nrows();
    let eig = SymmetricEigen::new(corr);
    let top = eig.eigenvalues.max();
    let tol = EIGEN_TIE_TOL * top.abs().max(1.0);
    let basis: Vec<DVector<f64>> = (0..k)
        .filter(|&i| eig.eigenvalues[i] >= top - tol)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();

    let mut v = DVector::zeros(k);
    for j in 0..k {
        // projection of e_j onto the leading eigenspace
        let mut proj = DVector::zeros(k);
        for b in &basis {
            proj += b * b[j];
        }
        let norm = proj.norm();
        if norm > 1e-8 {
            v = proj / norm;
            break;
        }
    }
    if v.sum() < 0.0 {
        v = -v;
    }
    v.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("item{i}")).collect()
    }

    #[test]
    fn perfectly_correlated_items() {
        let a = [0.0, 1.0, 1.0, 0.0, 1.0];
        let m = IndexModel::fit_columns(&names(2), &[&a, &a]).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((m.loadings[0] - h).abs() < 1e-12);
        assert!((m.loadings[1] - h).abs() < 1e-12);
    }

    #[test]
    fn uncorrelated_items_tie_break_to_first() {
        let a = [1.0, -1.0, 1.0, -1.0];
        let b = [1.0, 1.0, -1.0, -1.0];
        let m = IndexModel::fit_columns(&names(2), &[&a, &b]).unwrap();
        assert!((m.loadings[0] - 1.0).abs() < 1e-12);
        assert!(m.loadings[1].abs() < 1e-12);
    }

    #[test]
    fn sign_convention_and_unit_norm() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 1.0, 4.0, 3.0, 6.0];
        let c = [5.0, 3.0, 2.0, 2.0, 1.0];
        let m = IndexModel::fit_columns(&names(3), &[&a, &b, &c]).unwrap();
        let norm: f64 = m.loadings.iter().map(|l| l * l).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(m.loadings.iter().sum::<f64>() >= 0.0);
    }

    #[test]
    fn endpoints_and_clamping() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0, 3.0, 2.0, 4.0];
        let m = IndexModel::fit_columns(&names(2), &[&a, &b]).unwrap();
        assert_eq!(m.score(&[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(m.score(&[4.0, 4.0]).unwrap(), 100.0);
        assert_eq!(m.score(&[40.0, 40.0]).unwrap(), 100.0);
        assert_eq!(m.score(&[-40.0, -40.0]).unwrap(), 0.0);
        assert!(m.score(&[1.0]).is_err());
        assert!(m.score(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn errors() {
        let a = [1.0, 2.0, 3.0];
        let flat = [2.0, 2.0, 2.0];
        assert!(IndexModel::fit_columns(&names(1), &[&a]).is_err());
        assert!(IndexModel::fit_columns(&names(2), &[&a, &flat]).is_err());
    }
}
