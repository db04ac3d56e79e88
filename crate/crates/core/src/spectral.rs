//! Spectral partitioning of a weighted graph under the ratio-cut or
//! normalized-cut relaxation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigen::{self, EigenPairs};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kmeans;
use crate::partition::Partition;

/// k-means restarts used by [`spectral_cluster`].
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Cluster size measured by node count; Laplacian `D − W`.
    #[default]
    RCut,
    /// Cluster size measured by volume; Laplacian `I − D^{-1/2} W D^{-1/2}`.
    NCut,
}

impl Objective {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rcut" => Ok(Self::RCut),
            "ncut" => Ok(Self::NCut),
            other => Err(Error::Param(format!("unknown objective `{other}` (rcut|ncut)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::RCut => "rcut",
            Self::NCut => "ncut",
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The graph Laplacian as a matrix-free symmetric operator.
pub struct Laplacian<'g> {
    graph: &'g Graph,
    objective: Objective,
    degrees: Vec<f64>,
    /// `D^{-1/2}`, zero for isolated nodes.
    inv_sqrt: Vec<f64>,
}

impl<'g> Laplacian<'g> {
    pub fn new(graph: &'g Graph, objective: Objective) -> Self {
        let degrees = graph.degrees();
        let inv_sqrt = degrees
            .iter()
            .map(|&d| if d > 0.0 { d.sqrt().recip() } else { 0.0 })
            .collect();
        Self {
            graph,
            objective,
            degrees,
            inv_sqrt,
        }
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn degree(&self, v: usize) -> f64 {
        self.degrees[v]
    }

    /// `y = L x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = self.graph;
        match self.objective {
            Objective::RCut => {
                for v in 0..g.n() {
                    let s: f64 = g.neighbors(v).map(|(u, w)| w * x[u]).sum();
                    y[v] = self.degrees[v] * x[v] - s;
                }
            }
            Objective::NCut => {
                for v in 0..g.n() {
                    let s: f64 = g
                        .neighbors(v)
                        .map(|(u, w)| w * self.inv_sqrt[u] * x[u])
                        .sum();
                    y[v] = x[v] - self.inv_sqrt[v] * s;
                }
            }
        }
    }

    /// Upper bound on the spectral radius: `2·max degree` or 2.
    pub fn norm_bound(&self) -> f64 {
        match self.objective {
            Objective::RCut => 2.0 * self.degrees.iter().copied().fold(0.0, f64::max),
            Objective::NCut => 2.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for v in 0..n {
            match self.objective {
                Objective::RCut => m[(v, v)] = self.degrees[v],
                Objective::NCut => m[(v, v)] = 1.0,
            }
            for (u, w) in self.graph.neighbors(v) {
                m[(v, u)] -= match self.objective {
                    Objective::RCut => w,
                    Objective::NCut => w * self.inv_sqrt[u] * self.inv_sqrt[v],
                };
            }
        }
        m
    }

    /// `‖L v − μ v‖`.
    pub fn residual(&self, value: f64, vector: &[f64]) -> f64 {
        let mut y = vec![0.0; vector.len()];
        self.apply(vector, &mut y);
        y.iter()
            .zip(vector)
            .map(|(a, b)| (a - value * b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Eigenvectors of the `K` smallest Laplacian eigenvalues, one row per node.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub vectors: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl SpectralEmbedding {
    pub fn row(&self, v: usize) -> Vec<f64> {
        self.vectors.row(v).iter().copied().collect()
    }
}

/// Smallest `count` eigenpairs of the Laplacian of `graph`.
pub fn eigenpairs(graph: &Graph, objective: Objective, count: usize) -> Result<EigenPairs> {
    eigen::smallest_eigenpairs(&Laplacian::new(graph, objective), count)
}

pub fn embed(graph: &Graph, k: usize, objective: Objective) -> Result<SpectralEmbedding> {
    let n = graph.n();
    if k < 2 || k > n {
        return Err(Error::Param(format!("embedding needs 2 <= K <= n, got K={k}, n={n}")));
    }
    let pairs = eigenpairs(graph, objective, k)?;
    let mut vectors = DMatrix::zeros(n, k);
    for (j, col) in pairs.vectors.iter().enumerate() {
        for v in 0..n {
            vectors[(v, j)] = col[v];
        }
    }
    if objective == Objective::NCut {
        for mut row in vectors.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
    }
    Ok(SpectralEmbedding {
        vectors,
        eigenvalues: pairs.values,
    })
}

pub fn spectral_cluster(graph: &Graph, k: usize, objective: Objective, seed: u64) -> Result<Partition> {
    spectral_cluster_with(graph, k, objective, DEFAULT_RESTARTS, seed)
}

pub fn spectral_cluster_with(
    graph: &Graph,
    k: usize,
    objective: Objective,
    restarts: usize,
    seed: u64,
) -> Result<Partition> {
    let part = if k == 1 {
        Partition::new(vec![0; graph.n()], 1)?
    } else {
        let emb = embed(graph, k, objective)?;
        kmeans::kmeans(&emb, k, restarts, seed)?
    };
    Ok(part.with_provenance(graph.params.clone(), Some(objective)))
}

/// `Σ_i Cut(C_i, C̄_i) · size(V) / size(C_i)`, with size the node count for
/// RCut and the volume for NCut. For two clusters this is
/// `Cut · (size(V)/size(C) + size(V)/size(C̄))`. Infinite when a cluster is
/// empty (or has zero volume).
pub fn rcut_ncut_value(graph: &Graph, partition: &Partition, objective: Objective) -> Result<f64> {
    partition.check_len(graph.n())?;
    let k = partition.k();
    let a = partition.assignment();
    let mut size = vec![0.0; k];
    let mut cut = vec![0.0; k];
    for v in 0..graph.n() {
        size[a[v]] += match objective {
            Objective::RCut => 1.0,
            Objective::NCut => graph.degree(v),
        };
    }
    for (u, v, w) in graph.edges() {
        if a[u] != a[v] {
            cut[a[u]] += w;
            cut[a[v]] += w;
        }
    }
    let total: f64 = size.iter().sum();
    let mut value = 0.0;
    for i in 0..k {
        if size[i] == 0.0 {
            return Ok(f64::INFINITY);
        }
        value += cut[i] * total / size[i];
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphParams;
    use rand::Rng;

    fn unit(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, edges.iter().map(|&(u, v)| (u, v, 1.0)), GraphParams::knn(1, None))
            .unwrap()
    }

    fn clique_pair(m: usize) -> Graph {
        let mut e = Vec::new();
        for base in [0, m] {
            for i in 0..m {
                for j in i + 1..m {
                    e.push((base + i, base + j));
                }
            }
        }
        unit(2 * m, &e)
    }

    #[test]
    fn laplacian_of_single_edge() {
        let g = unit(2, &[(0, 1)]);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(Laplacian::new(&g, Objective::RCut).to_dense(), expect);
        assert_eq!(Laplacian::new(&g, Objective::NCut).to_dense(), expect);
    }

    #[test]
    fn triangle_spectrum() {
        let g = unit(3, &[(0, 1), (1, 2), (0, 2)]);
        let e = eigenpairs(&g, Objective::RCut, 3).unwrap();
        assert!(e.values[0].abs() < 1e-12);
        assert!((e.values[1] - 3.0).abs() < 1e-12 && (e.values[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_node_row_is_identity_under_ncut() {
        let g = unit(3, &[(0, 1)]);
        let m = Laplacian::new(&g, Objective::NCut).to_dense();
        assert_eq!(m.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_vector_is_exactly_null() {
        let ds = crate::data::sample_gaussian_mixture(
            &crate::data::GaussianMixtureSpec::imbalanced_pair(),
            200,
            9,
        )
        .unwrap();
        let g = crate::graph::build_knn(&ds, &GraphParams::knn(10, Some(0.7))).unwrap();
        let lap = Laplacian::new(&g, Objective::RCut);
        let mut y = vec![1.0; 200];
        lap.apply(&vec![1.0; 200], &mut y);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn components_give_zero_eigenvalues() {
        let g = clique_pair(4);
        for obj in [Objective::RCut, Objective::NCut] {
            let e = embed(&g, 2, obj).unwrap();
            assert!(e.eigenvalues.iter().all(|&v| v.abs() < 1e-8));
        }
        let path = unit(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let e = embed(&path, 3, Objective::RCut).unwrap();
        assert_eq!(e.eigenvalues.iter().filter(|v| v.abs() < 1e-8).count(), 1);
    }

    #[test]
    fn disjoint_edges_embed_identically_per_component() {
        let g = unit(4, &[(0, 1), (2, 3)]);
        let e = embed(&g, 2, Objective::RCut).unwrap();
        assert_eq!(e.row(0), e.row(1));
        assert_eq!(e.row(2), e.row(3));
        assert_ne!(e.row(0), e.row(2));
    }

    #[test]
    fn cliques_are_recovered() {
        let g = clique_pair(5);
        for obj in [Objective::RCut, Objective::NCut] {
            let p = spectral_cluster(&g, 2, obj, 1).unwrap();
            assert_eq!(p.canonical_labels(), [vec![0; 5], vec![1; 5]].concat());
            assert_eq!(crate::graph::cut_value(&g, &p).unwrap(), 0.0);
            assert_eq!(p.objective, Some(obj));
        }
    }

    #[test]
    fn path_of_four_splits_in_the_middle() {
        let g = unit(4, &[(0, 1), (1, 2), (2, 3)]);
        let p = spectral_cluster(&g, 2, Objective::RCut, 0).unwrap();
        assert_eq!(p.canonical_labels(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn objective_values() {
        let two = unit(4, &[(0, 1), (2, 3)]);
        let p = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        assert_eq!(rcut_ncut_value(&two, &p, Objective::RCut).unwrap(), 0.0);

        let path = unit(3, &[(0, 1), (1, 2)]);
        let p = Partition::new(vec![0, 1, 1], 2).unwrap();
        assert_eq!(rcut_ncut_value(&path, &p, Objective::RCut).unwrap(), 4.5);
        // vol = 1 and 3, vol(V) = 4: 1·(4/1 + 4/3). Dividing by vol(V) gives
        // the familiar 1/1 + 1/3.
        let ncut = rcut_ncut_value(&path, &p, Objective::NCut).unwrap();
        assert!((ncut - 16.0 / 3.0).abs() < 1e-15);
        assert!((ncut / 4.0 - 4.0 / 3.0).abs() < 1e-15);

        let empty = Partition::new(vec![0, 0, 0], 2).unwrap();
        assert_eq!(rcut_ncut_value(&path, &empty, Objective::RCut).unwrap(), f64::INFINITY);
    }

    #[test]
    fn spectral_beats_random_partitions() {
        let ds = crate::data::sample_gaussian_mixture(
            &crate::data::GaussianMixtureSpec::small_cluster_triple(),
            150,
            3,
        )
        .unwrap();
        let g = crate::graph::build_knn(&ds, &GraphParams::knn(8, None)).unwrap();
        let mut rng = crate::data::rng_from_seed(77);
        for obj in [Objective::RCut, Objective::NCut] {
            for k in [2, 3] {
                let p = spectral_cluster(&g, k, obj, 5).unwrap();
                let value = rcut_ncut_value(&g, &p, obj).unwrap();
                let mut random: Vec<f64> = (0..100)
                    .map(|_| {
                        let a = (0..150).map(|_| rng.random_range(0..k)).collect();
                        rcut_ncut_value(&g, &Partition::new(a, k).unwrap(), obj).unwrap()
                    })
                    .collect();
                random.sort_by(f64::total_cmp);
                assert!(value <= random[50], "{obj} K={k}: {value} vs {}", random[50]);
            }
        }
    }
}
