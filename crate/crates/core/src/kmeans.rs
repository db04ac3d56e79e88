//! k-means with k-means++ seeding, used to discretize spectral embeddings.

use rand::Rng;

use crate::data::{rng_from_seed, Rng64};
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::spectral::SpectralEmbedding;

const MAX_ITERATIONS: usize = 300;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best of `restarts` k-means runs by within-cluster sum of squares.
///
/// A cluster left empty after an assignment step takes the point farthest
/// from its current center (among clusters with more than one member).
pub fn kmeans(embedding: &SpectralEmbedding, k: usize, restarts: usize, seed: u64) -> Result<Partition> {
    let rows: Vec<Vec<f64>> = (0..embedding.vectors.nrows()).map(|v| embedding.row(v)).collect();
    kmeans_rows(&rows, k, restarts, seed)
}

pub fn kmeans_rows(rows: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Result<Partition> {
    let n = rows.len();
    if restarts == 0 {
        return Err(Error::Param("k-means needs at least one restart".into()));
    }
    if k == 0 || n < k {
        return Err(Error::Param(format!("cannot form {k} clusters from {n} points")));
    }
    if k == 1 {
        return Partition::new(vec![0; n], 1);
    }
    let mut rng = rng_from_seed(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts {
        let (wcss, assignment) = lloyd(rows, k, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| wcss < *b) {
            best = Some((wcss, assignment));
        }
    }
    Partition::new(best.unwrap().1, k)
}

fn plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut Rng64) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if t < w {
                    chosen = i;
                    break;
                }
                t -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = rows[pick].clone();
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sq(r, &c));
        }
        centers.push(c);
    }
    centers
}

fn assign(rows: &[Vec<f64>], centers: &[Vec<f64>], out: &mut [usize]) {
    for (a, r) in out.iter_mut().zip(rows) {
        let mut best = (f64::INFINITY, 0);
        for (j, c) in centers.iter().enumerate() {
            let d = sq(r, c);
            if d < best.0 {
                best = (d, j);
            }
        }
        *a = best.1;
    }
}

fn repair_empty(rows: &[Vec<f64>], centers: &mut [Vec<f64>], assignment: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = (f64::NEG_INFINITY, usize::MAX);
        for (i, r) in rows.iter().enumerate() {
            if counts[assignment[i]] <= 1 {
                continue;
            }
            let d = sq(r, &centers[assignment[i]]);
            if d > far.0 {
                far = (d, i);
            }
        }
        if far.1 == usize::MAX {
            return;
        }
        assignment[far.1] = empty;
        centers[empty] = rows[far.1].clone();
    }
}

fn update(rows: &[Vec<f64>], assignment: &[usize], centers: &mut [Vec<f64>]) {
    let dim = rows[0].len();
    let k = centers.len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (r, &a) in rows.iter().zip(assignment) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(r) {
            *s += x;
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
        }
    }
}

fn lloyd(rows: &[Vec<f64>], k: usize, rng: &mut Rng64) -> (f64, Vec<usize>) {
    let mut centers = plus_plus(rows, k, rng);
    let mut assignment = vec![0; rows.len()];
    assign(rows, &centers, &mut assignment);
    repair_empty(rows, &mut centers, &mut assignment, k);
    for _ in 0..MAX_ITERATIONS {
        update(rows, &assignment, &mut centers);
        let mut next = assignment.clone();
        assign(rows, &centers, &mut next);
        repair_empty(rows, &mut centers, &mut next, k);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    update(rows, &assignment, &mut centers);
    let wcss = rows
        .iter()
        .zip(&assignment)
        .map(|(r, &a)| sq(r, &centers[a]))
        .sum();
    (wcss, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_groups() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| if i < 5 { vec![0.0, 0.0] } else { vec![10.0, 10.0] })
            .collect();
        let p = kmeans_rows(&rows, 2, 10, 3).unwrap();
        assert_eq!(p.canonical_labels(), [vec![0; 5], vec![1; 5]].concat());
    }

    #[test]
    fn single_cluster() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        assert_eq!(kmeans_rows(&rows, 1, 1, 0).unwrap().assignment(), &[0, 0, 0]);
    }

    #[test]
    fn identical_rows_still_use_every_label() {
        let rows = vec![vec![0.5, 0.5]; 6];
        let p = kmeans_rows(&rows, 2, 3, 0).unwrap();
        let mut sizes = p.sizes();
        sizes.sort();
        assert_eq!(sizes, vec![1, 5]);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(kmeans_rows(&[vec![0.0]], 2, 1, 0), Err(Error::Param(_))));
        assert!(matches!(kmeans_rows(&vec![vec![0.0]; 3], 2, 0, 0), Err(Error::Param(_))));
    }

    #[test]
    fn deterministic_per_seed() {
        let mut rng = rng_from_seed(1);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random(), rng.random()]).collect();
        let a = kmeans_rows(&rows, 3, 4, 11).unwrap();
        let b = kmeans_rows(&rows, 3, 4, 11).unwrap();
        assert_eq!(a, b);
    }
}
