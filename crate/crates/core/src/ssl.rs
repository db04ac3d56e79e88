//! Gaussian random field label propagation.

use nalgebra::{Cholesky, DMatrix};

use crate::data::{Dataset, LabelMask};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::partition::Partition;
use crate::spectral::Objective;

/// Harmonic class scores `F` (one row per node, one column per class).
///
/// Labeled rows are one-hot. On every component holding a label the
/// unlabeled rows solve `L_uu F_u = W_ul Y_l`; components with no label get
/// the one-hot row of the most frequent labeled class.
pub fn harmonic_scores(graph: &Graph, mask: &LabelMask) -> Result<Vec<Vec<f64>>> {
    let n = graph.n();
    let k = mask.num_classes();
    if let Some((id, _)) = mask.iter().find(|&(id, _)| id >= n) {
        return Err(Error::Param(format!("labeled id {id} outside 0..{n}")));
    }
    let mut present = vec![0usize; k];
    for (_, c) in mask.iter() {
        present[c] += 1;
    }
    if let Some(c) = present.iter().position(|&m| m == 0) {
        return Err(Error::Param(format!("class {c} has no labeled node")));
    }
    let prior = (0..k).fold(0, |b, c| if present[c] > present[b] { c } else { b });

    let mut f = vec![vec![0.0; k]; n];
    for (id, c) in mask.iter() {
        f[id][c] = 1.0;
    }
    let (comp, count) = graph.components();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for v in 0..n {
        members[comp[v]].push(v);
    }
    for nodes in &members {
        let unlabeled: Vec<usize> = nodes.iter().copied().filter(|&v| !mask.is_labeled(v)).collect();
        if unlabeled.is_empty() {
            continue;
        }
        if unlabeled.len() == nodes.len() {
            for &v in &unlabeled {
                f[v][prior] = 1.0;
            }
            continue;
        }
        let m = unlabeled.len();
        let mut local = vec![usize::MAX; n];
        for (i, &v) in unlabeled.iter().enumerate() {
            local[v] = i;
        }
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut b = DMatrix::<f64>::zeros(m, k);
        for (i, &v) in unlabeled.iter().enumerate() {
            a[(i, i)] = graph.degree(v);
            for (u, w) in graph.neighbors(v) {
                match mask.get(u) {
                    Some(c) => b[(i, c)] += w,
                    None => a[(i, local[u])] -= w,
                }
            }
        }
        let x = match cholesky_solve(a.clone(), &b) {
            Some(x) => x,
            None => eliminate(a, b)?,
        };
        for (i, &v) in unlabeled.iter().enumerate() {
            for c in 0..k {
                f[v][c] = x[(i, c)];
            }
        }
    }
    Ok(f)
}

/// Solves `A X = B` after symmetric diagonal scaling, or `None` if the
/// factorization breaks down or leaves a large residual.
fn cholesky_solve(mut a: DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let m = a.nrows();
    let s: Vec<f64> = (0..m).map(|i| a[(i, i)].sqrt().recip()).collect();
    let mut b = b.clone();
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] *= s[i] * s[j];
        }
        for c in 0..b.ncols() {
            b[(i, c)] *= s[i];
        }
    }
    let a_copy = a.clone();
    let mut x = Cholesky::new(a)?.solve(&b);
    let resid = (&a_copy * &x - &b).norm();
    if !resid.is_finite() || resid > 1e-10 * b.norm().max(1.0) {
        return None;
    }
    for i in 0..m {
        for c in 0..x.ncols() {
            x[(i, c)] *= s[i];
        }
    }
    Some(x)
}

/// Gaussian elimination on the Laplacian block without subtractions: each
/// pivot is recomputed as the total weight from the node to the nodes not yet
/// eliminated plus its weight to the labeled nodes. Stays accurate when
/// weights span hundreds of orders of magnitude.
fn eliminate(a: DMatrix<f64>, mut b: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = a.nrows();
    let k = b.ncols();
    let mut w = a.map(|x| (-x).max(0.0));
    let mut pivots = vec![0.0; m];
    for v in 0..m {
        let rest: Vec<usize> = (v + 1..m).filter(|&j| w[(v, j)] > 0.0).collect();
        let d = rest.iter().map(|&j| w[(v, j)]).sum::<f64>() + (0..k).map(|c| b[(v, c)]).sum::<f64>();
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Numerical("unlabeled node lost its connection to the labels".into()));
        }
        pivots[v] = d;
        for &u in &rest {
            let wu = w[(u, v)];
            for &j in &rest {
                if j != u {
                    w[(u, j)] += wu * (w[(v, j)] / d);
                }
            }
            for c in 0..k {
                b[(u, c)] += wu * (b[(v, c)] / d);
            }
        }
    }
    let mut x = DMatrix::<f64>::zeros(m, k);
    for v in (0..m).rev() {
        for c in 0..k {
            let mut acc = b[(v, c)];
            for j in v + 1..m {
                acc += w[(v, j)] * x[(j, c)];
            }
            x[(v, c)] = acc / pivots[v];
        }
    }
    Ok(x)
}

/// Class of each node by row-wise argmax of the harmonic scores, ties to the
/// lower class. Labeled nodes keep their labels.
pub fn grf_propagate(graph: &Graph, mask: &LabelMask) -> Result<Partition> {
    let f = harmonic_scores(graph, mask)?;
    let assignment = f
        .iter()
        .enumerate()
        .map(|(v, row)| {
            mask.get(v).unwrap_or_else(|| {
                (0..row.len()).fold(0, |b, c| if row[c] > row[b] { c } else { b })
            })
        })
        .collect();
    Ok(Partition::new(assignment, mask.num_classes())?
        .with_provenance(graph.params.clone(), Some(Objective::RCut)))
}

/// Fraction of unlabeled nodes whose predicted class differs from the truth.
pub fn ssl_error_rate(partition: &Partition, dataset: &Dataset, mask: &LabelMask) -> Result<f64> {
    let truth = dataset
        .labels()
        .ok_or_else(|| Error::Data("dataset has no true labels".into()))?;
    partition.check_len(truth.len())?;
    let (mut wrong, mut total) = (0usize, 0usize);
    for (v, &t) in truth.iter().enumerate() {
        if mask.is_labeled(v) {
            continue;
        }
        total += 1;
        if partition.cluster_of(v) != t {
            wrong += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { wrong as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphParams;

    fn unit(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, edges.iter().map(|&(u, v)| (u, v, 1.0)), GraphParams::knn(1, None))
            .unwrap()
    }

    #[test]
    fn path_midpoint_is_a_tie() {
        let g = unit(3, &[(0, 1), (1, 2)]);
        let mask = LabelMask::new([(0, 0), (2, 1)], 3, 2).unwrap();
        let f = harmonic_scores(&g, &mask).unwrap();
        assert!((f[1][0] - 0.5).abs() < 1e-12 && (f[1][1] - 0.5).abs() < 1e-12);
        assert_eq!(grf_propagate(&g, &mask).unwrap().assignment(), &[0, 0, 1]);
    }

    #[test]
    fn fully_labeled_is_identity() {
        let g = unit(4, &[(0, 1), (1, 2), (2, 3)]);
        let mask = LabelMask::new([(0, 1), (1, 0), (2, 1), (3, 0)], 4, 2).unwrap();
        assert_eq!(grf_propagate(&g, &mask).unwrap().assignment(), &[1, 0, 1, 0]);
    }

    #[test]
    fn each_clique_takes_its_label() {
        let mut e = Vec::new();
        for base in [0, 4] {
            for i in 0..4 {
                for j in i + 1..4 {
                    e.push((base + i, base + j));
                }
            }
        }
        let g = unit(8, &e);
        let mask = LabelMask::new([(1, 1), (6, 0)], 8, 2).unwrap();
        assert_eq!(grf_propagate(&g, &mask).unwrap().assignment(), &[1, 1, 1, 1, 0, 0, 0, 0]);
    }

    #[test]
    fn unlabeled_component_takes_most_frequent_class() {
        let g = unit(6, &[(0, 1), (1, 2), (3, 4)]);
        let mask = LabelMask::new([(0, 0), (1, 1), (2, 1)], 6, 2).unwrap();
        let p = grf_propagate(&g, &mask).unwrap();
        assert_eq!(&p.assignment()[3..], &[1, 1, 1]);
    }

    #[test]
    fn harmonic_scores_are_bounded_and_stochastic() {
        let ds = crate::data::sample_two_moons_plus_gaussian(300, 5).unwrap();
        let g = crate::graph::build_knn(&ds, &GraphParams::knn(10, Some(0.3))).unwrap();
        let mask = LabelMask::random(&ds, 20, 5).unwrap();
        let f = harmonic_scores(&g, &mask).unwrap();
        for row in &f {
            assert!(row.iter().all(|&x| (-1e-9..=1.0 + 1e-9).contains(&x)));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        let p = grf_propagate(&g, &mask).unwrap();
        for (id, c) in mask.iter() {
            assert_eq!(p.cluster_of(id), c);
        }
    }

    #[test]
    fn tiny_bridges_to_the_labels() {
        // Path 0 - 1 - 2 - 3 with weights a, 1, b: f = b / (a + b + ab) on
        // both inner nodes, which a plain factorization cannot resolve.
        let (a, b) = (1e-300, 3e-300);
        let edges = vec![(0, 1, a), (1, 2, 1.0), (2, 3, b)];
        let g = Graph::from_edges(4, edges, GraphParams::knn(1, None)).unwrap();
        let mask = LabelMask::new([(0, 0), (3, 1)], 4, 2).unwrap();
        let f = harmonic_scores(&g, &mask).unwrap();
        for v in [1, 2] {
            assert!((f[v][1] - 0.75).abs() < 1e-12, "{:?}", f[v]);
            assert!((f[v][0] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn elimination_matches_cholesky() {
        use rand::Rng;
        let mut rng = crate::data::rng_from_seed(11);
        let m = 30;
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut b = DMatrix::<f64>::zeros(m, 2);
        for i in 0..m {
            for j in i + 1..m {
                if rng.random::<f64>() < 0.2 {
                    let w = rng.random::<f64>();
                    a[(i, j)] -= w;
                    a[(j, i)] -= w;
                    a[(i, i)] += w;
                    a[(j, j)] += w;
                }
            }
            let c = i % 2;
            let w = rng.random::<f64>() * 0.1;
            b[(i, c)] += w;
            a[(i, i)] += w;
        }
        let x = cholesky_solve(a.clone(), &b).unwrap();
        let y = eliminate(a, b).unwrap();
        assert!((x - y).norm() < 1e-10);
    }

    #[test]
    fn error_rate_counts_unlabeled_only() {
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0, 1];
        let ds = Dataset::new((0..12).map(|i| vec![i as f64]).collect(), Some(labels.clone())).unwrap();
        let mask = LabelMask::new([(10, 0), (11, 1)], 12, 2).unwrap();
        let perfect = Partition::new(labels.clone(), 2).unwrap();
        assert_eq!(ssl_error_rate(&perfect, &ds, &mask).unwrap(), 0.0);
        let flipped: Vec<usize> = labels.iter().enumerate().map(|(i, &l)| if i < 10 { 1 - l } else { l }).collect();
        assert_eq!(ssl_error_rate(&Partition::new(flipped, 2).unwrap(), &ds, &mask).unwrap(), 1.0);
        let mut three = labels.clone();
        for v in [0, 4, 7] {
            three[v] = 1 - three[v];
        }
        let r = ssl_error_rate(&Partition::new(three, 2).unwrap(), &ds, &mask).unwrap();
        assert!((r - 0.3).abs() < 1e-15);
        let unlabeled = Dataset::new(vec![vec![0.0], vec![1.0]], None).unwrap();
        assert!(matches!(
            ssl_error_rate(&Partition::new(vec![0, 1], 2).unwrap(), &unlabeled, &LabelMask::new([(0, 0), (1, 1)], 2, 2).unwrap()),
            Err(Error::Data(_))
        ));
    }
}
