//! Cluster-level subsampling and honest half-splits.

use rand::seq::index;
use rand::Rng;

/// Rows grouped by cluster; cluster `c` owns `rows[c]`.
#[derive(Debug, Clone)]
pub(crate) struct Clusters {
    rows: Vec<Vec<u32>>,
}

impl Clusters {
    pub fn new(codes: &[usize], cluster_aware: bool) -> Self {
        if !cluster_aware {
            return Clusters {
                rows: (0..codes.len() as u32).map(|r| vec![r]).collect(),
            };
        }
        let n = codes.iter().copied().max().map_or(0, |m| m + 1);
        let mut rows = vec![Vec::new(); n];
        for (r, &c) in codes.iter().enumerate() {
            rows[c].push(r as u32);
        }
        rows.retain(|r| !r.is_empty());
        Clusters { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Sorted rows belonging to the given clusters.
    pub fn rows_of(&self, clusters: &[usize]) -> Vec<u32> {
        let mut out: Vec<u32> = clusters
            .iter()
            .flat_map(|&c| self.rows[c].iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// `k` distinct elements of `pool`, in draw order.
pub(crate) fn choose<R: Rng>(rng: &mut R, pool: &[usize], k: usize) -> Vec<usize> {
    let k = k.min(pool.len());
    index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

/// Splits a drawn cluster set into (splitting, estimation) halves.
pub(crate) fn honest_halves<R: Rng>(
    rng: &mut R,
    clusters: &[usize],
    honesty_fraction: f64,
) -> (Vec<usize>, Vec<usize>) {
    let k = clusters.len();
    let n_split = ((honesty_fraction * k as f64).round() as usize).clamp(1, k.saturating_sub(1).max(1));
    let mut shuffled = choose(rng, clusters, k);
    let estimation = shuffled.split_off(n_split);
    (shuffled, estimation)
}
