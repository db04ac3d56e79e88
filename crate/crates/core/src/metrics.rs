//! Agreement between a partition and ground-truth labels.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Above this many clusters the best matching is found with the Hungarian
/// method instead of trying every permutation.
const PERMUTATION_LIMIT: usize = 6;

/// `confusion[c][l]` = nodes in cluster `c` with true label `l`.
pub fn confusion_matrix(partition: &Partition, truth: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; classes]; partition.k()];
    for (v, &l) in truth.iter().enumerate() {
        m[partition.cluster_of(v)][l] += 1;
    }
    m
}

fn best_matching(confusion: &[Vec<usize>]) -> usize {
    let k = confusion.len();
    if k > PERMUTATION_LIMIT {
        let weights = Matrix::from_rows(
            confusion.iter().map(|row| row.iter().map(|&c| c as i64).collect::<Vec<_>>()),
        )
        .expect("square confusion matrix");
        return kuhn_munkres(&weights).0 as usize;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    permute(&mut perm, 0, confusion, &mut best);
    best
}

fn permute(perm: &mut [usize], at: usize, confusion: &[Vec<usize>], best: &mut usize) {
    if at == perm.len() {
        let hits = perm.iter().enumerate().map(|(c, &l)| confusion[c][l]).sum();
        *best = (*best).max(hits);
        return;
    }
    for i in at..perm.len() {
        perm.swap(at, i);
        permute(perm, at + 1, confusion, best);
        perm.swap(at, i);
    }
}

/// Smallest misassignment fraction over all one-to-one matchings of clusters
/// to labels.
pub fn clustering_error_rate(partition: &Partition, dataset: &Dataset) -> Result<f64> {
    let truth = dataset
        .labels()
        .ok_or_else(|| Error::Data("dataset has no true labels".into()))?;
    partition.check_len(truth.len())?;
    let classes = dataset.num_classes().unwrap_or(0);
    if classes != partition.k() {
        return Err(Error::Data(format!(
            "partition has {} clusters but the labels have {classes} classes",
            partition.k()
        )));
    }
    let hits = best_matching(&confusion_matrix(partition, truth, classes));
    Ok(1.0 - hits as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(labels: Vec<usize>) -> Dataset {
        Dataset::new((0..labels.len()).map(|i| vec![i as f64]).collect(), Some(labels)).unwrap()
    }

    #[test]
    fn relabeling_is_free() {
        let ds = labeled(vec![0, 0, 1, 1, 2, 2]);
        let p = Partition::new(vec![2, 2, 0, 0, 1, 1], 3).unwrap();
        assert_eq!(clustering_error_rate(&p, &ds).unwrap(), 0.0);
        let swapped = Partition::new(vec![1, 1, 0, 0, 0, 0], 2).unwrap();
        assert_eq!(
            clustering_error_rate(&swapped, &labeled(vec![0, 0, 1, 1, 1, 1])).unwrap(),
            0.0
        );
    }

    #[test]
    fn counts_misplaced_points() {
        let ds = labeled(vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        let p = Partition::new(vec![0, 0, 0, 1, 0, 1, 1, 0, 1, 1], 2).unwrap();
        assert!((clustering_error_rate(&p, &ds).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn hungarian_matches_permutation_search() {
        // Eight clusters, labels shifted by one with a few strays.
        let labels: Vec<usize> = (0..80).map(|i| i / 10).collect();
        let mut assign: Vec<usize> = labels.iter().map(|&l| (l + 1) % 8).collect();
        assign[3] = 5;
        assign[47] = 0;
        let ds = labeled(labels);
        let p = Partition::new(assign, 8).unwrap();
        assert!((clustering_error_rate(&p, &ds).unwrap() - 2.0 / 80.0).abs() < 1e-15);
    }

    #[test]
    fn cluster_count_must_match() {
        let ds = labeled(vec![0, 1, 2]);
        let p = Partition::new(vec![0, 1, 1], 2).unwrap();
        assert!(matches!(clustering_error_rate(&p, &ds), Err(Error::Data(_))));
    }
}
