//! Numerical checks of the large-sample behavior of ranks and of cuts on
//! rank-modulated graphs, and hyperplane cuts used to trace cut curves.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::density::Density;
use crate::error::{Error, Result};
use crate::graph::{build_baseline, crossing_weight, Graph, GraphBuilder, GraphParams};
use crate::partition::Partition;
use crate::pcut::default_k0;
use crate::quadrature;
use crate::rank::{rank_dataset, EtaStatistic};
use crate::spectral::{rcut_ncut_value, Objective};

/// The half-space split `{x : x[axis] ≤ threshold}` versus the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneCut {
    pub axis: usize,
    pub threshold: f64,
}

impl HyperplaneCut {
    pub fn new(axis: usize, threshold: f64) -> Self {
        Self { axis, threshold }
    }
}

/// Cluster 0 holds the points with `x[axis] ≤ threshold`. One side may be
/// empty, which shows up as a zero entry in [`Partition::sizes`].
pub fn hyperplane_partition(dataset: &Dataset, cut: HyperplaneCut) -> Result<Partition> {
    if cut.axis >= dataset.dim() {
        return Err(Error::Param(format!(
            "axis {} out of range for {}-dimensional data",
            cut.axis,
            dataset.dim()
        )));
    }
    let assignment = dataset
        .points()
        .map(|x| usize::from(x[cut.axis] > cut.threshold))
        .collect();
    Partition::new(assignment, 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveObjective {
    Cut,
    RCut,
    NCut,
}

impl CurveObjective {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cut" => Ok(Self::Cut),
            "rcut" => Ok(Self::RCut),
            "ncut" => Ok(Self::NCut),
            other => Err(Error::Param(format!("unknown curve objective `{other}` (cut|rcut|ncut)"))),
        }
    }
}

/// Objective of the hyperplane split at each threshold; `None` where one
/// side is empty.
pub fn cut_curve(
    dataset: &Dataset,
    graph: &Graph,
    axis: usize,
    thresholds: &[f64],
    objective: CurveObjective,
) -> Result<Vec<(f64, Option<f64>)>> {
    if graph.n() != dataset.len() {
        return Err(Error::Shape {
            expected: dataset.len(),
            actual: graph.n(),
        });
    }
    thresholds
        .iter()
        .map(|&t| {
            let p = hyperplane_partition(dataset, HyperplaneCut::new(axis, t))?;
            if p.min_cluster_size() == 0 {
                return Ok((t, None));
            }
            let v = match objective {
                CurveObjective::Cut => crossing_weight(graph, &p)?,
                CurveObjective::RCut => rcut_ncut_value(graph, &p, Objective::RCut)?,
                CurveObjective::NCut => rcut_ncut_value(graph, &p, Objective::NCut)?,
            };
            Ok((t, Some(v)))
        })
        .collect()
}

/// `t,value` CSV, blank where the curve is undefined.
pub fn curve_csv(curve: &[(f64, Option<f64>)]) -> String {
    let mut out = String::from("t,value\n");
    for (t, v) in curve {
        out.push_str(&format!("{t:?},{}\n", v.map(|v| format!("{v:?}")).unwrap_or_default()));
    }
    out
}

/// Threshold with the smallest defined curve value (first on ties).
pub fn curve_argmin(curve: &[(f64, Option<f64>)]) -> Option<f64> {
    curve
        .iter()
        .filter_map(|&(t, v)| v.map(|v| (t, v)))
        .fold(None, |best: Option<(f64, f64)>, (t, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((t, v)),
        })
        .map(|(t, _)| t)
}

/// Volume of the unit ball in `R^d` (`η_0 = 1`, `η_1 = 2`).
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * PI / d as f64,
    }
}

/// `C_d = 2η_{d−1} / ((d+1) η_d^{1+1/d})`.
pub fn limit_constant(d: usize) -> f64 {
    assert!(d >= 1);
    let df = d as f64;
    2.0 * unit_ball_volume(d - 1) / ((df + 1.0) * unit_ball_volume(d).powf(1.0 + 1.0 / df))
}

/// Degree modulation `ρ = λ + 2(1−λ)p`.
pub fn rho(lambda: f64, pvalue: f64) -> f64 {
    lambda + 2.0 * (1.0 - lambda) * pvalue
}

/// Limit of the scaled ratio cut of a hyperplane on rank-modulated graphs:
/// `C_d · B_S · ∫_S f^{1−1/d} ρ^{1+1/d}`, with `B_S = 1/μ(C⁺) + 1/μ(C⁻)`.
/// The surface integral is a point evaluation for `d = 1` and a 1-D
/// quadrature for `d = 2`.
pub fn predicted_limit(density: &dyn Density, cut: HyperplaneCut, lambda: f64) -> Result<f64> {
    let d = density.dim();
    if cut.axis >= d {
        return Err(Error::Param(format!("axis {} out of range for dimension {d}", cut.axis)));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Param(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let below = density.mass_below(cut.axis, cut.threshold);
    let above = 1.0 - below;
    if below <= 0.0 || above <= 0.0 {
        return Err(Error::Param("the hyperplane leaves one side with no mass".into()));
    }
    let b_s = 1.0 / below + 1.0 / above;
    let df = d as f64;
    let integrand = |x: &[f64]| -> Result<f64> {
        let f = density.pdf(x);
        let r = rho(lambda, density.pvalue(x)?);
        let f_part = if d == 1 { 1.0 } else { f.powf(1.0 - 1.0 / df) };
        Ok(f_part * r.powf(1.0 + 1.0 / df))
    };
    let surface = match d {
        1 => integrand(&[cut.threshold])?,
        2 => {
            let other = 1 - cut.axis;
            let (lo, hi) = density.support(other);
            let point = |s: f64| {
                let mut x = [0.0; 2];
                x[cut.axis] = cut.threshold;
                x[other] = s;
                x
            };
            let failure = std::cell::RefCell::new(None);
            let value = quadrature::integrate(
                |s| match integrand(&point(s)) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    }
                },
                lo,
                hi,
                1e-8,
            );
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            value?
        }
        _ => {
            return Err(Error::Param(format!(
                "surface integral is implemented for d <= 2, got d = {d}"
            )))
        }
    };
    Ok(limit_constant(d) * b_s * surface)
}

/// Neighbor count used for the limit checks: `⌈n^{0.7}⌉` in one dimension,
/// `⌈n^{2/3}⌉` otherwise.
pub fn kn_schedule(n: usize, d: usize) -> usize {
    let e = if d == 1 { 0.7 } else { 2.0 / 3.0 };
    ((n as f64).powf(e).ceil() as usize).min(n - 1)
}

/// `(1/k)(n/k)^{1/d} · Cut · (1/|C⁺| + 1/|C⁻|)`.
pub fn scaled_rcut(graph: &Graph, partition: &Partition, k: usize, d: usize) -> Result<f64> {
    let n = graph.n() as f64;
    let sizes = partition.sizes();
    if sizes.len() != 2 || sizes.contains(&0) {
        return Err(Error::Param("scaled cut needs two nonempty sides".into()));
    }
    let cut = crossing_weight(graph, partition)?;
    let kf = k as f64;
    Ok((n / kf).powf(1.0 / d as f64) / kf
        * cut
        * (1.0 / sizes[0] as f64 + 1.0 / sizes[1] as f64))
}

fn sample_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add((i as u64).wrapping_mul(0x2545_f491_4f6c_dd1d))
}

/// Mean `|R(x_i) − p(x_i)|` for a sample of each size in `n_values`.
pub fn verify_thm1(density: &dyn Density, n_values: &[usize], seed: u64) -> Result<Vec<(usize, f64)>> {
    n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let ds = density.sample(n, sample_seed(seed, i))?;
            Ok((n, rank_error(density, &ds)?))
        })
        .collect()
}

/// Mean absolute difference between empirical ranks and `p`.
pub fn rank_error(density: &dyn Density, dataset: &Dataset) -> Result<f64> {
    let n = dataset.len();
    let baseline = build_baseline(dataset, default_k0(n))?;
    let ranks = rank_dataset(dataset, &baseline, EtaStatistic::Mean)?;
    let p: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| density.pvalue(dataset.point(i)))
        .collect::<Result<_>>()?;
    Ok(ranks.rank.iter().zip(&p).map(|(r, p)| (r - p).abs()).sum::<f64>() / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCheckResult {
    pub n_values: Vec<usize>,
    pub empirical: Vec<f64>,
    pub predicted: f64,
    pub relative_errors: Vec<f64>,
}

impl LimitCheckResult {
    /// `n,empirical,predicted,rel_error` CSV.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("n,empirical,predicted,rel_error\n");
        for ((n, e), r) in self.n_values.iter().zip(&self.empirical).zip(&self.relative_errors) {
            out.push_str(&format!("{n},{e:?},{:?},{r:?}\n", self.predicted));
        }
        out
    }
}

/// Scaled ratio cut of `cut` on an unweighted rank-modulated graph of a
/// fresh sample.
pub fn empirical_scaled_rcut(dataset: &Dataset, cut: HyperplaneCut, lambda: f64) -> Result<f64> {
    let n = dataset.len();
    let d = dataset.dim();
    let k = kn_schedule(n, d);
    let baseline = build_baseline(dataset, default_k0(n))?;
    let ranks = rank_dataset(dataset, &baseline, EtaStatistic::Mean)?;
    let max_degree = if lambda < 1.0 { 2 * k } else { k }.min(n - 1);
    let graph = GraphBuilder::new(dataset, max_degree).rmd(&ranks, &GraphParams::rmd(lambda, k, None))?;
    scaled_rcut(&graph, &hyperplane_partition(dataset, cut)?, k, d)
}

/// Empirical scaled ratio cuts against [`predicted_limit`]. Cuts are counted
/// once per undirected edge of the union-symmetrized graph.
pub fn verify_thm2(
    density: &dyn Density,
    cut: HyperplaneCut,
    lambda: f64,
    n_values: &[usize],
    seed: u64,
) -> Result<LimitCheckResult> {
    let predicted = predicted_limit(density, cut, lambda)?;
    let empirical: Vec<f64> = n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| empirical_scaled_rcut(&density.sample(n, sample_seed(seed, i))?, cut, lambda))
        .collect::<Result<_>>()?;
    let relative_errors = empirical.iter().map(|e| (e - predicted) / predicted).collect();
    Ok(LimitCheckResult {
        n_values: n_values.to_vec(),
        empirical,
        predicted,
        relative_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::GaussianMixtureSpec;
    use crate::density::UniformBox;

    fn line(xs: &[f64]) -> Dataset {
        Dataset::new(xs.iter().map(|&x| vec![x]).collect(), None).unwrap()
    }

    #[test]
    fn hyperplane_sides() {
        let ds = line(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let all = hyperplane_partition(&ds, HyperplaneCut::new(0, -1.0)).unwrap();
        assert_eq!(all.sizes(), vec![0, 5]);
        let median = hyperplane_partition(&ds, HyperplaneCut::new(0, 2.0)).unwrap();
        let s = median.sizes();
        assert!(s[0].abs_diff(s[1]) <= 1);
        assert!(hyperplane_partition(&ds, HyperplaneCut::new(1, 0.0)).is_err());
    }

    #[test]
    fn curve_is_zero_between_components() {
        let ds = line(&[0.0, 1.0, 10.0, 11.0]);
        let g = Graph::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)], GraphParams::knn(1, None)).unwrap();
        let c = cut_curve(&ds, &g, 0, &[-1.0, 0.5, 5.0], CurveObjective::Cut).unwrap();
        assert_eq!(c, vec![(-1.0, None), (0.5, Some(1.0)), (5.0, Some(0.0))]);
        assert_eq!(curve_argmin(&c), Some(5.0));
    }

    #[test]
    fn constants() {
        assert_eq!(unit_ball_volume(0), 1.0);
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((limit_constant(1) - 0.25).abs() < 1e-15);
        // d = 2: 2·2 / (3·π^{3/2}).
        assert!((limit_constant(2) - 4.0 / (3.0 * PI.powf(1.5))).abs() < 1e-14);
    }

    #[test]
    fn uniform_midpoint_prediction() {
        let u = UniformBox::unit(1);
        let v = predicted_limit(&u, HyperplaneCut::new(0, 0.5), 1.0).unwrap();
        assert!((v - 4.0 * 0.25).abs() < 1e-12);
        // ρ is constant 2 − λ on the uniform density.
        let v = predicted_limit(&u, HyperplaneCut::new(0, 0.3), 0.2).unwrap();
        let expect = 0.25 * (1.0 / 0.3 + 1.0 / 0.7) * 1.8f64.powi(2);
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn rho_bounds_and_modulation() {
        for l in [0.0, 0.3, 1.0] {
            for p in [0.0, 0.4, 1.0] {
                let r = rho(l, p);
                assert!(r >= l - 1e-15 && r <= 2.0 - l + 1e-15);
            }
        }
        let bimodal = GaussianMixtureSpec {
            weights: vec![0.5, 0.5],
            means: vec![vec![-2.0], vec![2.0]],
            covariances: vec![vec![1.0], vec![1.0]],
        };
        let at = |t: f64, l: f64| predicted_limit(&bimodal, HyperplaneCut::new(0, t), l).unwrap();
        let lambdas = [0.0, 0.2, 0.5, 1.0];
        for w in lambdas.windows(2) {
            assert!(at(0.0, w[0]) <= at(0.0, w[1]));
            assert!(at(2.0, w[0]) >= at(2.0, w[1]));
        }
    }

    #[test]
    fn two_dimensional_prediction_is_finite() {
        let g = GaussianMixtureSpec::imbalanced_pair();
        let v = predicted_limit(&g, HyperplaneCut::new(0, 1.0), 0.3).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn rank_error_on_grid_is_degenerate() {
        // Evenly spaced points away from the two ends all share η, so they
        // all get rank 1.
        let ds = line(&(0..50).map(|i| i as f64).collect::<Vec<_>>());
        let baseline = build_baseline(&ds, 2).unwrap();
        let r = rank_dataset(&ds, &baseline, EtaStatistic::Mean).unwrap();
        assert!(r.rank[1..49].iter().all(|&x| x == 1.0));
        assert!(r.rank[0] < 1.0 && r.rank[49] < 1.0);
    }
}
