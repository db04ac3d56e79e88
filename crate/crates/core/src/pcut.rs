//! Partition-constrained minimum cut: generate candidate partitions over a
//! grid of graph parameters, keep those whose clusters all hold at least
//! `⌈δn⌉` nodes, and pick the one with the smallest cut on a fixed baseline
//! graph.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelMask};
use crate::error::{Error, Result};
use crate::graph::{baseline_from_builder, crossing_weight, kway_cut_value, Graph, GraphBuilder, GraphKind, GraphParams};
use crate::partition::Partition;
use crate::rank::{rank_dataset, EtaStatistic};
use crate::spectral::{self, Objective, DEFAULT_RESTARTS};
use crate::ssl::grf_propagate;

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_LAMBDAS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
pub const DEFAULT_KS: [usize; 13] = [5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 120, 150];

/// Guards `⌈δn⌉` against products like `0.05 · 1100 = 55.000000000000007`.
const CEIL_SLACK: f64 = 1e-9;

/// Smallest admissible cluster size for a fraction `delta` of `n` nodes.
pub fn min_cluster_size_for(delta: f64, n: usize) -> usize {
    (delta * n as f64 - CEIL_SLACK).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Clustering,
    Ssl,
}

/// Graph parameters to search. `sigma_multipliers` scale the mean `k`-th
/// nearest-neighbor distance; `None` requests binary weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub kind: GraphKind,
    pub lambdas: Vec<f64>,
    pub ks: Vec<usize>,
    pub sigma_multipliers: Vec<Option<f64>>,
    pub objective: Objective,
    pub mode: Mode,
}

impl SearchGrid {
    /// RMD graphs over `λ ∈ {0, 0.2, …, 1}`, `k ∈ {5, 10, 20, …, 100, 120, 150}`
    /// (capped below `n`) and `σ = 2^j · d̃_k` for `j = −3..=3`.
    pub fn standard(n: usize) -> Self {
        Self {
            kind: GraphKind::Rmd,
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            ks: DEFAULT_KS.iter().copied().filter(|&k| k < n).collect(),
            sigma_multipliers: (-3..=3).map(|j| Some(2f64.powi(j))).collect(),
            objective: Objective::RCut,
            mode: Mode::Clustering,
        }
    }

    /// The same `k` and `σ` ranges on plain k-NN graphs.
    pub fn knn(n: usize) -> Self {
        Self {
            kind: GraphKind::Knn,
            lambdas: vec![1.0],
            ..Self::standard(n)
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !matches!(self.kind, GraphKind::Rmd | GraphKind::Knn) {
            return Err(Error::Param(format!("grid search supports rmd and knn graphs, not {}", self.kind)));
        }
        if self.lambdas.is_empty() || self.ks.is_empty() || self.sigma_multipliers.is_empty() {
            return Err(Error::Param("every grid axis needs at least one value".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Param(format!("lambda {l} outside [0, 1]")));
        }
        if let Some(k) = self.ks.iter().find(|&&k| k == 0 || k >= n) {
            return Err(Error::Param(format!("k = {k} outside 1..{n}")));
        }
        if let Some(s) = self.sigma_multipliers.iter().flatten().find(|s| !(**s > 0.0)) {
            return Err(Error::Param(format!("sigma multiplier {s} must be positive")));
        }
        Ok(())
    }

    fn effective_lambdas(&self) -> Vec<Option<f64>> {
        match self.kind {
            GraphKind::Rmd => self.lambdas.iter().map(|&l| Some(l)).collect(),
            _ => vec![None],
        }
    }

    /// Grid points in evaluation order: `λ` outermost, then `k`, then `σ`.
    pub fn points(&self) -> Vec<(Option<f64>, usize, Option<f64>)> {
        let mut out = Vec::new();
        for lambda in self.effective_lambdas() {
            for &k in &self.ks {
                for &m in &self.sigma_multipliers {
                    out.push((lambda, k, m));
                }
            }
        }
        out
    }

    fn max_degree(&self) -> usize {
        let kmax = self.ks.iter().copied().max().unwrap_or(1);
        match self.kind {
            GraphKind::Rmd if self.lambdas.iter().any(|&l| l < 1.0) => 2 * kmax,
            _ => kmax,
        }
    }
}

/// Settings shared by every candidate of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PCutConfig {
    pub clusters: usize,
    /// Baseline degree; `⌈√n⌉` when absent.
    pub k0: Option<usize>,
    pub seed: u64,
    pub restarts: usize,
}

impl PCutConfig {
    pub fn new(clusters: usize, seed: u64) -> Self {
        Self {
            clusters,
            k0: None,
            seed,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

pub fn default_k0(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).clamp(1, n.saturating_sub(1).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineInfo {
    pub k0: usize,
    /// `None` when the baseline is binary.
    pub sigma0: Option<f64>,
}

/// One partition in the pool, with everything selection needs except the
/// δ-dependent feasibility flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    /// `None` for partitions injected from outside the grid.
    pub params: Option<GraphParams>,
    pub partition: Partition,
    pub cut0: f64,
    pub min_cluster_size: usize,
    /// Cut ratio against the balanced reference (two clusters only).
    pub q: Option<f64>,
    /// Smallest cluster as a fraction of `n`.
    pub y: f64,
}

/// All candidate partitions for one dataset, reusable across `δ`.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    pub n: usize,
    pub clusters: usize,
    pub baseline: BaselineInfo,
    pub baseline_graph: Graph,
    pub balanced_reference: Option<Partition>,
    pub entries: Vec<PoolEntry>,
}

fn candidate_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

impl CandidatePool {
    /// Builds the baseline, ranks the nodes on it once, then generates one
    /// partition per grid point.
    pub fn generate(
        dataset: &Dataset,
        grid: &SearchGrid,
        config: &PCutConfig,
        mask: Option<&LabelMask>,
    ) -> Result<Self> {
        let n = dataset.len();
        let kk = config.clusters;
        if kk < 2 || kk > n {
            return Err(Error::Param(format!("need 2 <= K <= n, got K = {kk}, n = {n}")));
        }
        grid.validate(n)?;
        if grid.mode == Mode::Ssl && mask.is_none() {
            return Err(Error::Param("ssl mode needs a label mask".into()));
        }
        let k0 = config.k0.unwrap_or_else(|| default_k0(n));
        if k0 == 0 || k0 >= n {
            return Err(Error::Param(format!("baseline k0 must satisfy 1 <= k0 < n = {n}, got {k0}")));
        }
        let builder = GraphBuilder::new(dataset, grid.max_degree().max(k0).min(n - 1));
        let baseline_graph = baseline_from_builder(&builder, k0);
        let rank = match grid.kind {
            GraphKind::Rmd => Some(rank_dataset(dataset, &baseline_graph, EtaStatistic::Mean)?),
            _ => None,
        };
        let points = grid.points();
        let partitions: Vec<(GraphParams, Partition)> = points
            .par_iter()
            .enumerate()
            .map(|(i, &(lambda, k, mult))| {
                let scale = builder.mean_knn_distance(k);
                let sigma = mult.map(|m| m * scale).filter(|&s| s > 0.0);
                let params = match lambda {
                    Some(l) => GraphParams::rmd(l, k, sigma),
                    None => GraphParams::knn(k, sigma),
                };
                let graph = builder.build(rank.as_ref(), &params)?;
                let partition = match grid.mode {
                    Mode::Clustering => spectral::spectral_cluster_with(
                        &graph,
                        kk,
                        grid.objective,
                        config.restarts,
                        candidate_seed(config.seed, i),
                    )?,
                    Mode::Ssl => grf_propagate(&graph, mask.expect("checked above"))?,
                };
                Ok((params, partition))
            })
            .collect::<Result<_>>()?;

        let balanced_reference = (kk == 2).then(|| balanced_reference(&baseline_graph)).transpose()?;
        let mut pool = Self {
            n,
            clusters: kk,
            baseline: BaselineInfo {
                k0,
                sigma0: baseline_graph.params.sigma,
            },
            baseline_graph,
            balanced_reference,
            entries: Vec::with_capacity(partitions.len()),
        };
        for (params, partition) in partitions {
            pool.push(Some(params), partition)?;
        }
        Ok(pool)
    }

    /// Adds a partition to the pool, scoring it on the baseline graph.
    pub fn push(&mut self, params: Option<GraphParams>, partition: Partition) -> Result<()> {
        partition.check_len(self.n)?;
        if partition.k() != self.clusters {
            return Err(Error::Param(format!(
                "candidate has {} clusters, pool expects {}",
                partition.k(),
                self.clusters
            )));
        }
        let cut0 = kway_cut_value(&self.baseline_graph, &partition)?;
        let min_cluster_size = partition.min_cluster_size();
        let q = match &self.balanced_reference {
            Some(b) => diagnostics_qy(&self.baseline_graph, &partition, b)?.0,
            None => None,
        };
        self.entries.push(PoolEntry {
            params,
            partition,
            cut0,
            min_cluster_size,
            q,
            y: min_cluster_size as f64 / self.n as f64,
        });
        Ok(())
    }

    /// Feasibility filtering and selection for one `δ`.
    pub fn select(&self, delta: f64) -> Result<PCutReport> {
        check_delta(delta, self.clusters)?;
        let min_size = min_cluster_size_for(delta, self.n);
        let mut selected: Option<usize> = None;
        let candidates: Vec<Candidate> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let feasible = e.min_cluster_size >= min_size;
                if feasible && selected.is_none_or(|s| e.cut0 < self.entries[s].cut0) {
                    selected = Some(i);
                }
                Candidate {
                    entry: e.clone(),
                    feasible,
                }
            })
            .collect();
        Ok(PCutReport {
            n: self.n,
            clusters: self.clusters,
            delta,
            min_size,
            baseline: self.baseline.clone(),
            candidates,
            selected,
        })
    }
}

fn check_delta(delta: f64, clusters: usize) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0 / clusters as f64) {
        return Err(Error::Param(format!(
            "delta must lie in (0, 1/K) = (0, {}), got {delta}",
            1.0 / clusters as f64
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(flatten)]
    pub entry: PoolEntry,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PCutReport {
    pub n: usize,
    pub clusters: usize,
    pub delta: f64,
    /// `⌈δn⌉`.
    pub min_size: usize,
    pub baseline: BaselineInfo,
    pub candidates: Vec<Candidate>,
    /// Feasible candidate with the smallest `cut0`, first in grid order on ties.
    pub selected: Option<usize>,
}

impl PCutReport {
    pub fn selected_candidate(&self) -> Result<&Candidate> {
        self.selected
            .map(|i| &self.candidates[i])
            .ok_or(Error::NoFeasiblePartition { min_size: self.min_size })
    }

    /// `lambda,k,sigma,cut0,min_cluster,feasible`, blank where a parameter
    /// does not apply (binary weights, plain k-NN, injected partitions).
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("lambda,k,sigma,cut0,min_cluster,feasible\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for c in &self.candidates {
            let p = c.entry.params.as_ref();
            writeln!(
                out,
                "{},{},{},{:?},{},{}",
                opt(p.and_then(|p| p.lambda)),
                p.and_then(|p| p.k).map(|k| k.to_string()).unwrap_or_default(),
                opt(p.and_then(|p| p.sigma)),
                c.entry.cut0,
                c.entry.min_cluster_size,
                c.feasible
            )
            .unwrap();
        }
        out
    }
}

/// Grid search followed by selection. When nothing is feasible the report
/// has `selected = None`; [`PCutReport::selected_candidate`] turns that into
/// [`Error::NoFeasiblePartition`].
pub fn run_pcut(
    dataset: &Dataset,
    grid: &SearchGrid,
    config: &PCutConfig,
    delta: f64,
    mask: Option<&LabelMask>,
) -> Result<PCutReport> {
    check_delta(delta, config.clusters)?;
    CandidatePool::generate(dataset, grid, config, mask)?.select(delta)
}

/// Median split along the Fiedler vector of the unnormalized baseline
/// Laplacian: the `⌊n/2⌋` nodes with the smallest coordinates form cluster 0.
pub fn balanced_reference(baseline: &Graph) -> Result<Partition> {
    let n = baseline.n();
    let pairs = spectral::eigenpairs(baseline, Objective::RCut, 2)?;
    let mut fiedler = pairs.vectors[1].clone();
    if let Some(first) = fiedler.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            fiedler.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fiedler[a].total_cmp(&fiedler[b]).then(a.cmp(&b)));
    let mut assignment = vec![1; n];
    for &v in &order[..n / 2] {
        assignment[v] = 0;
    }
    Partition::new(assignment, 2)
}

/// Cut ratio `q` (candidate crossing weight over that of the balanced
/// reference; `None` if the latter is zero) and imbalance `y`.
pub fn diagnostics_qy(baseline: &Graph, partition: &Partition, balanced: &Partition) -> Result<(Option<f64>, f64)> {
    if partition.k() != 2 || balanced.k() != 2 {
        return Err(Error::Param("cut-ratio diagnostics need two-cluster partitions".into()));
    }
    let reference = crossing_weight(baseline, balanced)?;
    let cut = crossing_weight(baseline, partition)?;
    let q = (reference > 0.0).then(|| cut / reference);
    let y = partition.min_cluster_size() as f64 / partition.len() as f64;
    Ok((q, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub delta: f64,
    pub cut0: Option<f64>,
    pub selected: Option<usize>,
    pub partition: Option<Partition>,
}

/// Selection for each `δ` (given in descending order) from a single
/// candidate pool.
pub fn delta_sweep(
    dataset: &Dataset,
    grid: &SearchGrid,
    config: &PCutConfig,
    deltas: &[f64],
) -> Result<(CandidatePool, Vec<SweepEntry>)> {
    if deltas.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Param("deltas must be in descending order".into()));
    }
    for &d in deltas {
        check_delta(d, config.clusters)?;
    }
    let pool = CandidatePool::generate(dataset, grid, config, None)?;
    let entries = sweep_pool(&pool, deltas)?;
    Ok((pool, entries))
}

pub fn sweep_pool(pool: &CandidatePool, deltas: &[f64]) -> Result<Vec<SweepEntry>> {
    deltas
        .iter()
        .map(|&delta| {
            let report = pool.select(delta)?;
            Ok(SweepEntry {
                delta,
                cut0: report.selected.map(|i| report.candidates[i].entry.cut0),
                selected: report.selected,
                partition: report.selected.map(|i| report.candidates[i].entry.partition.clone()),
            })
        })
        .collect()
}

/// `delta,cut0,selected` rows followed by `# flat_spot,hi,lo` lines.
pub fn sweep_csv(entries: &[SweepEntry]) -> String {
    let mut out = String::from("delta,cut0,selected\n");
    for e in entries {
        writeln!(
            out,
            "{:?},{},{}",
            e.delta,
            e.cut0.map(|c| format!("{c:?}")).unwrap_or_default(),
            e.selected.map(|s| s.to_string()).unwrap_or_default()
        )
        .unwrap();
    }
    let sweep: Vec<(f64, Option<f64>)> = entries.iter().map(|e| (e.delta, e.cut0)).collect();
    for (hi, lo) in flat_spot_detect(&sweep) {
        writeln!(out, "# flat_spot,{hi:?},{lo:?}").unwrap();
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-6 * a.abs().max(b.abs())
}

/// Maximal runs of at least two consecutive `δ` values (skipping entries
/// without a selection) whose `cut0` stays within relative `1e-6` of the
/// run's first value. Each run is reported as `(largest δ, smallest δ)`.
pub fn flat_spot_detect(sweep: &[(f64, Option<f64>)]) -> Vec<(f64, f64)> {
    let points: Vec<(f64, f64)> = sweep.iter().filter_map(|&(d, c)| c.map(|c| (d, c))).collect();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=points.len() {
        if i == points.len() || !close(points[start].1, points[i].1) {
            if i - start >= 2 {
                out.push((points[start].0, points[i - 1].0));
            }
            start = i;
        }
    }
    out
}

/// Largest graph [`brute_force_pcut`] will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 14;

/// Exact minimum of `cut0` over every `K`-partition of `graph` with all
/// clusters of size `≥ ⌈δn⌉`. Labels are canonical (clusters numbered by
/// smallest member). Among equal cuts the partition with the larger smallest
/// cluster wins, then the first in enumeration order.
pub fn brute_force_pcut(graph: &Graph, clusters: usize, delta: f64) -> Result<(Partition, f64)> {
    let n = graph.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::Param(format!("brute force is limited to {BRUTE_FORCE_LIMIT} nodes, got {n}")));
    }
    if clusters == 0 || clusters > n {
        return Err(Error::Param(format!("cannot split {n} nodes into {clusters} clusters")));
    }
    let min_size = min_cluster_size_for(delta, n);
    let edges: Vec<(usize, usize, f64)> = graph.edges().collect();
    let mut labels = vec![0usize; n];
    let mut sizes = vec![0usize; clusters];
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    // Restricted growth strings: node v may open cluster `used` only if all
    // lower clusters are already open.
    fn recurse(
        v: usize,
        used: usize,
        labels: &mut [usize],
        sizes: &mut [usize],
        min_size: usize,
        edges: &[(usize, usize, f64)],
        best: &mut Option<(f64, usize, Vec<usize>)>,
    ) {
        let n = labels.len();
        let k = sizes.len();
        if k - used > n - v {
            return;
        }
        if v == n {
            if sizes.iter().all(|&s| s >= min_size) {
                let cut: f64 = edges.iter().filter(|e| labels[e.0] != labels[e.1]).map(|e| e.2).sum();
                let cut0 = 2.0 * cut;
                let smallest = sizes.iter().copied().min().unwrap_or(0);
                if best
                    .as_ref()
                    .is_none_or(|(b, s, _)| cut0 < *b || (cut0 == *b && smallest > *s))
                {
                    *best = Some((cut0, smallest, labels.to_vec()));
                }
            }
            return;
        }
        for c in 0..=used.min(k - 1) {
            labels[v] = c;
            sizes[c] += 1;
            recurse(v + 1, used.max(c + 1), labels, sizes, min_size, edges, best);
            sizes[c] -= 1;
        }
    }
    recurse(0, 0, &mut labels, &mut sizes, min_size, &edges, &mut best);
    let (cut0, _, assignment) = best.ok_or(Error::NoFeasiblePartition { min_size })?;
    Ok((Partition::new(assignment, clusters)?, cut0))
}
