//! Density ranks.
//!
//! Each node gets a statistic `η` that grows as local density falls (an
//! average distance to its baseline-graph neighbors), and a rank
//! `R(v) = |{w : η(v) ≤ η(w)}| / n`. High rank means high density. Ties in
//! `η` share the higher rank, and `v` counts itself, so ranks lie in `[1/n, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GaussianMixtureSpec};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankVector {
    pub eta: Vec<f64>,
    pub rank: Vec<f64>,
}

impl RankVector {
    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }

    /// `id,eta,rank` CSV with a header line.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("id,eta,rank\n");
        for (i, (e, r)) in self.eta.iter().zip(&self.rank).enumerate() {
            out.push_str(&format!("{i},{e:?},{r:?}\n"));
        }
        out
    }
}

/// Which neighbor-distance statistic to use for `η`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EtaStatistic {
    /// Plain mean distance to all baseline neighbors.
    #[default]
    Mean,
    /// Window of order statistics around the median neighbor, each distance
    /// scaled by `(l/i)^(1/d)`.
    Weighted,
}

/// Computes `η` for every node from its neighbors in `baseline`.
///
/// On a k-NN graph the neighbors of `v` are the `k` points `v` itself chose
/// (its own nearest-neighbor list), not the extra nodes that the union
/// symmetrization attached to it. Other graph kinds use every adjacent node.
///
/// With [`EtaStatistic::Weighted`] and `m` neighbors sorted by distance, let
/// `l = max(1, ⌊m/2⌋)`; then
/// `η = (1/l) Σ_{i = l-⌊(l-1)/2⌋}^{l+⌊l/2⌋} (l/i)^{1/d} D_(i)`, with indices
/// clamped to `1..=m`.
pub fn compute_eta(
    dataset: &Dataset,
    baseline: &Graph,
    statistic: EtaStatistic,
    dim: usize,
) -> Result<Vec<f64>> {
    let n = dataset.len();
    if baseline.n() != n {
        return Err(Error::Shape {
            expected: n,
            actual: baseline.n(),
        });
    }
    if let Some(v) = (0..n).find(|&v| baseline.edge_count(v) == 0) {
        return Err(Error::IsolatedNode(v));
    }
    let own_list = match baseline.params.kind {
        GraphKind::BaselineKnn | GraphKind::Knn => baseline.params.k,
        _ => None,
    };
    let eta = (0..n)
        .into_par_iter()
        .map(|v| {
            let mut dists: Vec<(f64, usize)> = baseline
                .neighbor_ids(v)
                .iter()
                .map(|&w| (dataset.distance(v, w), w))
                .collect();
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some(k) = own_list {
                dists.truncate(k);
            }
            let dists: Vec<f64> = dists.into_iter().map(|(d, _)| d).collect();
            match statistic {
                EtaStatistic::Mean => dists.iter().sum::<f64>() / dists.len() as f64,
                EtaStatistic::Weighted => weighted_window(&dists, dim),
            }
        })
        .collect();
    Ok(eta)
}

fn weighted_window(sorted: &[f64], dim: usize) -> f64 {
    let m = sorted.len();
    let l = (m / 2).max(1);
    let first = (l - (l - 1) / 2).max(1);
    let last = (l + l / 2).min(m);
    let inv_d = 1.0 / dim.max(1) as f64;
    (first..=last)
        .map(|i| (l as f64 / i as f64).powf(inv_d) * sorted[i - 1])
        .sum::<f64>()
        / l as f64
}

/// Ranks from `η`: `rank[v] = |{w : η[v] ≤ η[w]}| / n`.
pub fn compute_rank(eta: &[f64]) -> RankVector {
    let n = eta.len();
    let mut sorted = eta.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = eta
        .iter()
        .map(|&e| {
            let below = sorted.partition_point(|&s| s < e);
            (n - below) as f64 / n as f64
        })
        .collect();
    RankVector {
        eta: eta.to_vec(),
        rank,
    }
}

/// `η` on the baseline graph followed by ranking.
pub fn rank_dataset(
    dataset: &Dataset,
    baseline: &Graph,
    statistic: EtaStatistic,
) -> Result<RankVector> {
    let eta = compute_eta(dataset, baseline, statistic, dataset.dim())?;
    Ok(compute_rank(&eta))
}

/// Population limit of the rank at `y`: the mass of `{x : f(x) ≤ f(y)}`.
pub fn analytic_pvalue(spec: &GaussianMixtureSpec, y: &[f64]) -> Result<f64> {
    spec.pvalue(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_baseline, build_knn, GraphParams};
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> Dataset {
        Dataset::new(xs.iter().map(|&x| vec![x]).collect(), None).unwrap()
    }

    #[test]
    fn eta_on_collinear_points() {
        let ds = line(&[0.0, 1.0, 3.0]);
        let g = build_baseline(&ds, 1).unwrap();
        // Nearest neighbors: 0 -> 1 (1), 1 -> 0 (1), 2 -> 1 (2).
        let eta = compute_eta(&ds, &g, EtaStatistic::Mean, 1).unwrap();
        assert_eq!(eta, vec![1.0, 1.0, 2.0]);
    }

    #[test]
    fn non_knn_graph_uses_all_adjacent_nodes() {
        let ds = line(&[0.0, 1.0, 3.0]);
        let g = crate::graph::build_epsilon(&ds, &GraphParams::epsilon(2.0, None)).unwrap();
        let eta = compute_eta(&ds, &g, EtaStatistic::Mean, 1).unwrap();
        assert_eq!(eta, vec![1.0, 1.5, 2.0]);
    }

    #[test]
    fn equidistant_points_share_eta() {
        // Vertices of a regular simplex: every pairwise distance is sqrt(2).
        let ds = Dataset::new(
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            None,
        )
        .unwrap();
        let g = build_knn(&ds, &GraphParams::knn(1, None)).unwrap();
        let eta = compute_eta(&ds, &g, EtaStatistic::Mean, 3).unwrap();
        assert!(eta.iter().all(|&e| (e - 2f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn duplicates_have_zero_eta() {
        let ds = line(&[5.0, 5.0]);
        let g = build_knn(&ds, &GraphParams::knn(1, None)).unwrap();
        assert_eq!(compute_eta(&ds, &g, EtaStatistic::Mean, 1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn isolated_node_is_an_error() {
        let ds = line(&[0.0, 1.0, 3.0]);
        let g = Graph::from_edges(3, [(0, 1, 1.0)], GraphParams::knn(1, None)).unwrap();
        assert!(matches!(
            compute_eta(&ds, &g, EtaStatistic::Mean, 1),
            Err(Error::IsolatedNode(2))
        ));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(compute_rank(&[1.0, 1.0, 2.0]).rank, vec![1.0, 1.0, 1.0 / 3.0]);
        assert_eq!(compute_rank(&[4.0; 5]).rank, vec![1.0; 5]);
        assert_eq!(
            compute_rank(&[1.0, 2.0, 3.0, 4.0]).rank,
            vec![1.0, 0.75, 0.5, 0.25]
        );
    }

    #[test]
    fn weighted_window_small_lists() {
        // One neighbor: l = 1, window is just D_(1).
        assert_eq!(weighted_window(&[2.0], 2), 2.0);
        // Four neighbors, d = 1: l = 2, window i = 2..=3,
        // η = (1/2)·(1·D2 + (2/3)·D3).
        let v = weighted_window(&[1.0, 2.0, 3.0, 4.0], 1);
        assert!((v - 0.5 * (2.0 + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn weighted_eta_tracks_density() {
        let ds = crate::data::sample_gaussian_mixture(
            &GaussianMixtureSpec::standard_normal(1),
            400,
            2,
        )
        .unwrap();
        let g = build_baseline(&ds, 20).unwrap();
        let r = rank_dataset(&ds, &g, EtaStatistic::Weighted).unwrap();
        // Averaged over a band, ranks follow the density: high near the mode,
        // low in the tails.
        let band_mean = |keep: &dyn Fn(f64) -> bool| {
            let picked: Vec<f64> = (0..400).filter(|&i| keep(ds.point(i)[0])).map(|i| r.rank[i]).collect();
            picked.iter().sum::<f64>() / picked.len() as f64
        };
        let core = band_mean(&|x| x.abs() < 0.5);
        let tail = band_mean(&|x| x.abs() > 2.0);
        assert!(core > 0.55 && tail < 0.15, "{core} {tail}");
    }

    proptest! {
        #[test]
        fn distinct_eta_gives_uniform_ranks(mut eta in proptest::collection::vec(0.0f64..100.0, 2..60)) {
            eta.sort_by(f64::total_cmp);
            eta.dedup();
            prop_assume!(eta.len() >= 2);
            let n = eta.len();
            let mut ranks = compute_rank(&eta).rank;
            ranks.sort_by(f64::total_cmp);
            let expect: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
            prop_assert_eq!(ranks, expect);
        }

        #[test]
        fn rank_is_antitone_in_eta(eta in proptest::collection::vec(0.0f64..10.0, 2..40)) {
            let r = compute_rank(&eta);
            for u in 0..eta.len() {
                prop_assert!(r.rank[u] >= 1.0 / eta.len() as f64 && r.rank[u] <= 1.0);
                for v in 0..eta.len() {
                    if eta[u] < eta[v] {
                        prop_assert!(r.rank[u] > r.rank[v]);
                    }
                }
            }
        }

        #[test]
        fn scaling_scales_eta_and_keeps_ranks(seed in 0u64..1000, scale in 0.1f64..10.0) {
            let ds = crate::data::sample_gaussian_mixture(
                &GaussianMixtureSpec::standard_normal(2), 40, seed).unwrap();
            let big = ds.scaled(scale);
            let g = build_knn(&ds, &GraphParams::knn(4, None)).unwrap();
            let gb = build_knn(&big, &GraphParams::knn(4, None)).unwrap();
            let a = rank_dataset(&ds, &g, EtaStatistic::Mean).unwrap();
            let b = rank_dataset(&big, &gb, EtaStatistic::Mean).unwrap();
            for (x, y) in a.eta.iter().zip(&b.eta) {
                prop_assert!((x * scale - y).abs() <= 1e-9 * y.abs().max(1.0));
            }
            prop_assert_eq!(a.rank, b.rank);
        }
    }
}
