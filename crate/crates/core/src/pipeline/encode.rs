//! Numeric encodings of categorical confounders.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Means encoding: every level is replaced by the within-level means of the
/// given numeric columns. Returns one encoded column per input column.
pub fn encode_categorical_means(levels: &[String], columns: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    if levels.is_empty() {
        return Err(Error::Data("cannot encode an empty level set".into()));
    }
    for col in columns {
        if col.len() != levels.len() {
            return Err(Error::Data("encoding columns differ in length from levels".into()));
        }
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (r, l) in levels.iter().enumerate() {
        groups.entry(l.as_str()).or_default().push(r);
    }
    Ok(columns
        .iter()
        .map(|col| {
            let mut out = vec![0.0; levels.len()];
            for rows in groups.values() {
                let m = rows.iter().map(|&r| col[r]).sum::<f64>() / rows.len() as f64;
                for &r in rows {
                    out[r] = m;
                }
            }
            out
        })
        .collect())
}

/// One indicator column per level, in sorted level order.
pub fn one_hot(levels: &[String]) -> Vec<(String, Vec<f64>)> {
    let mut distinct: Vec<&str> = levels.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    distinct
        .into_iter()
        .map(|lvl| {
            let col = levels
                .iter()
                .map(|l| if l == lvl { 1.0 } else { 0.0 })
                .collect();
            (lvl.to_owned(), col)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn level_means() {
        let enc = encode_categorical_means(&s(&["a", "a", "b"]), &[&[0.0, 1.0, 1.0]]).unwrap();
        assert_eq!(enc[0], vec![0.5, 0.5, 1.0]);
    }

    #[test]
    fn identical_means_identical_codes() {
        let enc = encode_categorical_means(&s(&["a", "b", "a", "b"]), &[&[1.0, 2.0, 3.0, 2.0]]).unwrap();
        assert_eq!(enc[0][0], enc[0][1]);
    }

    #[test]
    fn empty_levels_error() {
        assert!(encode_categorical_means(&[], &[]).is_err());
    }

    #[test]
    fn dummies() {
        let d = one_hot(&s(&["y", "x", "y"]));
        assert_eq!(d[0], ("x".to_string(), vec![0.0, 1.0, 0.0]));
        assert_eq!(d[1], ("y".to_string(), vec![1.0, 0.0, 1.0]));
    }
}
