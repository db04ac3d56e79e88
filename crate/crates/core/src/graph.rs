//! Graph construction: the baseline k₀-NN graph and every member of the
//! searchable graph families (rank-modulated degree, k-NN, ε, full RBF and
//! full adaptive RBF).
//!
//! All nearest-neighbor graphs are symmetrized with the union rule: `u ~ v`
//! whenever `v` is among the neighbors chosen by `u` *or* `u` is among the
//! neighbors chosen by `v`. Distance ties in neighbor lists go to the lower
//! node id. RBF weights are `exp(-d² / (2σ²))`.

use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::rank::RankVector;

/// Number of the neighbor whose distance sets the local scale of the
/// adaptive RBF kernel.
pub const ADAPTIVE_SCALE_NEIGHBOR: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    BaselineKnn,
    Rmd,
    Knn,
    Epsilon,
    FullRbf,
    FullArbf,
}

impl GraphKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BaselineKnn => "baseline_knn",
            Self::Rmd => "rmd",
            Self::Knn => "knn",
            Self::Epsilon => "epsilon",
            Self::FullRbf => "full_rbf",
            Self::FullArbf => "full_arbf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "baseline_knn" => Self::BaselineKnn,
            "rmd" => Self::Rmd,
            "knn" => Self::Knn,
            "epsilon" => Self::Epsilon,
            "full_rbf" => Self::FullRbf,
            "full_arbf" => Self::FullArbf,
            other => return Err(Error::Param(format!("unknown graph kind {other:?}"))),
        })
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Construction parameters. Absent fields do not apply to the graph kind;
/// `sigma: None` means binary weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub kind: GraphKind,
    pub lambda: Option<f64>,
    pub k: Option<usize>,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
}

impl GraphParams {
    pub fn rmd(lambda: f64, k: usize, sigma: Option<f64>) -> Self {
        Self {
            kind: GraphKind::Rmd,
            lambda: Some(lambda),
            k: Some(k),
            sigma,
            epsilon: None,
        }
    }

    pub fn knn(k: usize, sigma: Option<f64>) -> Self {
        Self {
            kind: GraphKind::Knn,
            lambda: None,
            k: Some(k),
            sigma,
            epsilon: None,
        }
    }

    pub fn epsilon(epsilon: f64, sigma: Option<f64>) -> Self {
        Self {
            kind: GraphKind::Epsilon,
            lambda: None,
            k: None,
            sigma,
            epsilon: Some(epsilon),
        }
    }

    pub fn full_rbf(sigma: f64) -> Self {
        Self {
            kind: GraphKind::FullRbf,
            lambda: None,
            k: None,
            sigma: Some(sigma),
            epsilon: None,
        }
    }

    pub fn full_arbf() -> Self {
        Self {
            kind: GraphKind::FullArbf,
            lambda: None,
            k: None,
            sigma: None,
            epsilon: None,
        }
    }

    fn require_k(&self, n: usize) -> Result<usize> {
        let k = self
            .k
            .ok_or_else(|| Error::Param(format!("{} graph needs k", self.kind)))?;
        if k == 0 || k >= n {
            return Err(Error::Param(format!("k must satisfy 1 <= k < n = {n}, got {k}")));
        }
        Ok(k)
    }
}

/// Weighted undirected graph in compressed sparse row form. Each adjacency
/// row is sorted by neighbor id and stores both directions of every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    pub params: GraphParams,
}

impl Graph {
    /// Builds a graph from undirected edges. Self-loops and non-positive or
    /// non-finite weights are rejected; a repeated pair keeps its first weight.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        params: GraphParams,
    ) -> Result<Self> {
        let mut list: Vec<(usize, usize, f64)> = Vec::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Param(format!("edge ({u},{v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(Error::Param(format!("self-loop at node {u}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Param(format!("edge ({u},{v}) has weight {w}")));
            }
            list.push((u.min(v), u.max(v), w));
        }
        list.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        list.dedup_by(|later, first| (later.0, later.1) == (first.0, first.1));
        Ok(Self::from_sorted_pairs(n, &list, params))
    }

    fn from_sorted_pairs(n: usize, pairs: &[(usize, usize, f64)], params: GraphParams) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v, _) in pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets[..n].to_vec();
        let mut targets = vec![0usize; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        // Pairs are sorted by (u, v) with u < v, so pushing v into row u and
        // u into row v keeps every row sorted by neighbor id.
        for &(u, v, w) in pairs {
            targets[fill[v]] = u;
            weights[fill[v]] = w;
            fill[v] += 1;
        }
        for &(u, v, w) in pairs {
            targets[fill[u]] = v;
            weights[fill[u]] = w;
            fill[u] += 1;
        }
        // Row v received its smaller neighbors first (in ascending order),
        // then its larger ones, so rows are sorted.
        Self {
            n,
            offsets,
            targets,
            weights,
            params,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[v]..self.offsets[v + 1];
        self.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    pub fn neighbor_ids(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Number of incident edges.
    pub fn edge_count(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Sum of incident edge weights.
    pub fn degree(&self, v: usize) -> f64 {
        self.weights[self.offsets[v]..self.offsets[v + 1]].iter().sum()
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|v| self.degree(v)).collect()
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let row = self.neighbor_ids(u);
        row.binary_search(&v)
            .ok()
            .map(|i| self.weights[self.offsets[u] + i])
    }

    /// Undirected edges `(u, v, w)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .filter(move |&(v, _)| v > u)
                .map(move |(v, w)| (u, v, w))
        })
    }

    /// Same node count, edge set and weights (parameters ignored).
    pub fn same_adjacency(&self, other: &Graph) -> bool {
        self.n == other.n
            && self.offsets == other.offsets
            && self.targets == other.targets
            && self.weights == other.weights
    }

    pub fn is_binary(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    /// Connected-component id per node (ids in order of smallest member) and
    /// the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in self.neighbor_ids(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    pub fn is_connected(&self) -> bool {
        self.components().1 == 1
    }

    /// Edge-list text: a header line, then `u,v,w` for every edge with `u < v`.
    pub fn to_edge_list(&self) -> String {
        let fmt_opt = |x: Option<f64>| x.map_or_else(|| "null".to_string(), |v| format!("{v:?}"));
        let mut out = format!(
            "n={} kind={} lambda={} k={} sigma={}",
            self.n,
            self.params.kind,
            fmt_opt(self.params.lambda),
            self.params.k.map_or_else(|| "null".into(), |k| k.to_string()),
            fmt_opt(self.params.sigma),
        );
        if let Some(eps) = self.params.epsilon {
            write!(out, " epsilon={eps:?}").unwrap();
        }
        out.push('\n');
        for (u, v, w) in self.edges() {
            writeln!(out, "{u},{v},{w:?}").unwrap();
        }
        out
    }

    /// Parses the format written by [`Graph::to_edge_list`].
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Parse {
            row: 1,
            msg: "missing header".into(),
        })?;
        let mut n = None;
        let mut params = GraphParams {
            kind: GraphKind::Knn,
            lambda: None,
            k: None,
            sigma: None,
            epsilon: None,
        };
        let bad = |msg: String| Error::Parse { row: 1, msg };
        let opt_f64 = |v: &str| -> Result<Option<f64>> {
            if v == "null" {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|_| bad(format!("bad number {v:?}")))
            }
        };
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| bad(format!("bad header field {field:?}")))?;
            match key {
                "n" => n = Some(value.parse().map_err(|_| bad(format!("bad n {value:?}")))?),
                "kind" => params.kind = GraphKind::parse(value)?,
                "lambda" => params.lambda = opt_f64(value)?,
                "k" => {
                    params.k = if value == "null" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| bad(format!("bad k {value:?}")))?)
                    }
                }
                "sigma" => params.sigma = opt_f64(value)?,
                "epsilon" => params.epsilon = opt_f64(value)?,
                _ => return Err(bad(format!("unknown header field {key:?}"))),
            }
        }
        let n = n.ok_or_else(|| bad("header lacks n".into()))?;
        let mut edges = Vec::new();
        for (idx, line) in lines.enumerate() {
            let row = idx + 2;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let err = || Error::Parse {
                row,
                msg: format!("expected u,v,w but found {line:?}"),
            };
            if parts.len() != 3 {
                return Err(err());
            }
            let u: usize = parts[0].trim().parse().map_err(|_| err())?;
            let v: usize = parts[1].trim().parse().map_err(|_| err())?;
            let w: f64 = parts[2].trim().parse().map_err(|_| err())?;
            edges.push((u, v, w));
        }
        Self::from_edges(n, edges, params)
    }
}

/// RBF similarity for a squared distance, floored at the smallest positive
/// normal so that far-apart edges keep a strictly positive weight.
pub fn rbf_weight(squared_distance: f64, sigma: f64) -> f64 {
    (-squared_distance / (2.0 * sigma * sigma))
        .exp()
        .max(f64::MIN_POSITIVE)
}

/// Per-node nearest-neighbor lists, sorted by `(distance, id)`.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    lists: Vec<Vec<(usize, f64)>>,
}

impl NeighborTable {
    /// Keeps the `depth` nearest neighbors of every node (capped at `n - 1`).
    pub fn new(dataset: &Dataset, depth: usize) -> Self {
        let n = dataset.len();
        let depth = depth.min(n - 1);
        let lists = (0..n)
            .into_par_iter()
            .map(|v| {
                let mut cands: Vec<(usize, f64)> = (0..n)
                    .filter(|&w| w != v)
                    .map(|w| (w, dataset.distance(v, w)))
                    .collect();
                let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
                if depth < cands.len() {
                    cands.select_nth_unstable_by(depth, cmp);
                    cands.truncate(depth);
                }
                cands.sort_unstable_by(cmp);
                cands
            })
            .collect();
        Self { lists }
    }

    pub fn n(&self) -> usize {
        self.lists.len()
    }

    pub fn depth(&self) -> usize {
        self.lists.first().map_or(0, Vec::len)
    }

    /// The `k` nearest neighbors of `v` as `(id, distance)`.
    pub fn nearest(&self, v: usize, k: usize) -> &[(usize, f64)] {
        &self.lists[v][..k.min(self.lists[v].len())]
    }

    /// Distance from `v` to its `k`-th nearest neighbor (1-based).
    pub fn kth_distance(&self, v: usize, k: usize) -> f64 {
        let list = &self.lists[v];
        list[k.clamp(1, list.len()) - 1].1
    }

    /// Average over nodes of the `k`-th nearest neighbor distance.
    pub fn mean_kth_distance(&self, k: usize) -> f64 {
        let n = self.n();
        (0..n).map(|v| self.kth_distance(v, k)).sum::<f64>() / n as f64
    }
}

/// Builds graph family members over one dataset, reusing a single neighbor
/// table for all nearest-neighbor constructions.
pub struct GraphBuilder<'a> {
    dataset: &'a Dataset,
    table: NeighborTable,
}

impl<'a> GraphBuilder<'a> {
    /// `max_degree` bounds the largest per-node neighbor count requested later.
    pub fn new(dataset: &'a Dataset, max_degree: usize) -> Self {
        let depth = max_degree.max(ADAPTIVE_SCALE_NEIGHBOR);
        Self {
            dataset,
            table: NeighborTable::new(dataset, depth),
        }
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn table(&self) -> &NeighborTable {
        &self.table
    }

    /// Mean `k`-th nearest neighbor distance, the natural RBF scale for k-NN graphs.
    pub fn mean_knn_distance(&self, k: usize) -> f64 {
        self.ensure_depth(k);
        self.table.mean_kth_distance(k)
    }

    fn ensure_depth(&self, k: usize) {
        let n = self.dataset.len();
        assert!(
            k.min(n - 1) <= self.table.depth(),
            "neighbor table depth {} too shallow for degree {k}",
            self.table.depth()
        );
    }

    /// Union-symmetrized graph where node `v` picks its `degrees[v]` nearest neighbors.
    pub fn from_degrees(&self, degrees: &[usize], params: GraphParams) -> Graph {
        let n = self.dataset.len();
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
        for (v, &deg) in degrees.iter().enumerate() {
            self.ensure_depth(deg);
            for &(w, d) in self.table.nearest(v, deg) {
                pairs.push((v.min(w), v.max(w), d));
            }
        }
        pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        pairs.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));
        let sigma = params.sigma;
        for p in &mut pairs {
            p.2 = match sigma {
                Some(s) => rbf_weight(p.2 * p.2, s),
                None => 1.0,
            };
        }
        Graph::from_sorted_pairs(n, &pairs, params)
    }

    pub fn knn(&self, params: &GraphParams) -> Result<Graph> {
        let k = params.require_k(self.dataset.len())?;
        Ok(self.from_degrees(&vec![k; self.dataset.len()], params.clone()))
    }

    pub fn rmd(&self, rank: &RankVector, params: &GraphParams) -> Result<Graph> {
        let n = self.dataset.len();
        let k = params.require_k(n)?;
        let lambda = params
            .lambda
            .ok_or_else(|| Error::Param("rmd graph needs lambda".into()))?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Param(format!("lambda must lie in [0,1], got {lambda}")));
        }
        if rank.len() != n {
            return Err(Error::Shape {
                expected: n,
                actual: rank.len(),
            });
        }
        let degrees = modulated_degrees(rank, lambda, k);
        Ok(self.from_degrees(&degrees, params.clone()))
    }

    pub fn build(&self, rank: Option<&RankVector>, params: &GraphParams) -> Result<Graph> {
        match params.kind {
            GraphKind::Rmd => {
                let rank = rank.ok_or_else(|| Error::Param("rmd graph needs ranks".into()))?;
                self.rmd(rank, params)
            }
            GraphKind::Knn | GraphKind::BaselineKnn => self.knn(params),
            GraphKind::Epsilon => build_epsilon(self.dataset, params),
            GraphKind::FullRbf => build_full_rbf(self.dataset, params),
            GraphKind::FullArbf => Ok(self.full_arbf()),
        }
    }

    pub fn full_arbf(&self) -> Graph {
        let n = self.dataset.len();
        let scale: Vec<f64> = (0..n)
            .map(|v| self.table.kth_distance(v, ADAPTIVE_SCALE_NEIGHBOR))
            .collect();
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for u in 0..n {
            for v in u + 1..n {
                let d2 = crate::data::squared_distance(self.dataset.point(u), self.dataset.point(v));
                let w = if d2 == 0.0 {
                    1.0
                } else {
                    (-d2 / (scale[u] * scale[v])).exp().max(f64::MIN_POSITIVE)
                };
                pairs.push((u, v, w));
            }
        }
        Graph::from_sorted_pairs(n, &pairs, GraphParams::full_arbf())
    }
}

/// Target degree `round(k·(λ + 2(1-λ)·R(v)))`, rounded half up and clamped to `[1, n-1]`.
pub fn modulated_degrees(rank: &RankVector, lambda: f64, k: usize) -> Vec<usize> {
    let n = rank.len();
    let hi = n.saturating_sub(1).max(1);
    rank.rank
        .iter()
        .map(|&r| {
            let target = k as f64 * (lambda + 2.0 * (1.0 - lambda) * r);
            ((target + 0.5).floor() as usize).clamp(1, hi)
        })
        .collect()
}

/// Baseline `k0`-NN graph with RBF weights at `σ₀ = mean k0-th NN distance`.
/// Falls back to binary weights when that scale is zero.
pub fn build_baseline(dataset: &Dataset, k0: usize) -> Result<Graph> {
    let n = dataset.len();
    if k0 == 0 || k0 >= n {
        return Err(Error::Param(format!("baseline k0 must satisfy 1 <= k0 < n = {n}, got {k0}")));
    }
    let builder = GraphBuilder::new(dataset, k0);
    Ok(baseline_from_builder(&builder, k0))
}

pub(crate) fn baseline_from_builder(builder: &GraphBuilder<'_>, k0: usize) -> Graph {
    let n = builder.dataset().len();
    let scale = builder.mean_knn_distance(k0);
    let sigma = (scale > 0.0).then_some(scale);
    let params = GraphParams {
        kind: GraphKind::BaselineKnn,
        lambda: None,
        k: Some(k0),
        sigma,
        epsilon: None,
    };
    let g = builder.from_degrees(&vec![k0; n], params);
    let (_, c) = g.components();
    if c > 1 {
        log::warn!("baseline {k0}-NN graph has {c} connected components; consider a larger k0");
    }
    g
}

pub fn build_rmd(dataset: &Dataset, rank: &RankVector, params: &GraphParams) -> Result<Graph> {
    let n = dataset.len();
    let k = params.require_k(n)?;
    let max_deg = (2 * k).min(n - 1);
    GraphBuilder::new(dataset, max_deg).rmd(rank, params)
}

pub fn build_knn(dataset: &Dataset, params: &GraphParams) -> Result<Graph> {
    let k = params.require_k(dataset.len())?;
    GraphBuilder::new(dataset, k).knn(params)
}

/// Edge iff `‖x_u − x_v‖ ≤ ε`; binary unless `sigma` is set.
pub fn build_epsilon(dataset: &Dataset, params: &GraphParams) -> Result<Graph> {
    let eps = params
        .epsilon
        .ok_or_else(|| Error::Param("epsilon graph needs epsilon".into()))?;
    let n = dataset.len();
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let d2 = crate::data::squared_distance(dataset.point(u), dataset.point(v));
            if d2.sqrt() <= eps {
                let w = params.sigma.map_or(1.0, |s| rbf_weight(d2, s));
                pairs.push((u, v, w));
            }
        }
    }
    if pairs.is_empty() {
        log::warn!("epsilon graph with epsilon = {eps} has no edges");
    }
    let mut params = params.clone();
    params.kind = GraphKind::Epsilon;
    Ok(Graph::from_sorted_pairs(n, &pairs, params))
}

/// Complete graph with RBF weights.
pub fn build_full_rbf(dataset: &Dataset, params: &GraphParams) -> Result<Graph> {
    let sigma = params
        .sigma
        .ok_or_else(|| Error::Param("full RBF graph needs sigma".into()))?;
    if !(sigma > 0.0) {
        return Err(Error::Param(format!("sigma must be positive, got {sigma}")));
    }
    let n = dataset.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            let d2 = crate::data::squared_distance(dataset.point(u), dataset.point(v));
            pairs.push((u, v, rbf_weight(d2, sigma)));
        }
    }
    Ok(Graph::from_sorted_pairs(n, &pairs, GraphParams::full_rbf(sigma)))
}

/// Complete graph with `w = exp(-d² / (σ_u σ_v))`, `σ_v` the distance to the
/// 7th nearest neighbor.
pub fn build_full_arbf(dataset: &Dataset) -> Graph {
    GraphBuilder::new(dataset, ADAPTIVE_SCALE_NEIGHBOR).full_arbf()
}

/// Cut value of a partition. For two clusters this is the total weight of
/// crossing edges; for `K > 2` it is `Σ_i Cut(C_i, C̄_i)`, which counts every
/// crossing edge twice.
pub fn cut_value(graph: &Graph, partition: &Partition) -> Result<f64> {
    let crossing = crossing_weight(graph, partition)?;
    Ok(if partition.k() == 2 { crossing } else { 2.0 * crossing })
}

/// `Σ_i Cut(C_i, C̄_i)` for any `K`, i.e. twice the crossing weight. This is
/// the quantity compared across candidates on the baseline graph.
pub fn kway_cut_value(graph: &Graph, partition: &Partition) -> Result<f64> {
    Ok(2.0 * crossing_weight(graph, partition)?)
}

/// Total weight of edges whose endpoints lie in different clusters.
pub fn crossing_weight(graph: &Graph, partition: &Partition) -> Result<f64> {
    partition.check_len(graph.n())?;
    let a = partition.assignment();
    Ok(graph
        .edges()
        .filter(|&(u, v, _)| a[u] != a[v])
        .map(|(_, _, w)| w)
        .sum())
}
