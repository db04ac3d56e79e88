use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphParams;
use crate::spectral::Objective;

/// Assignment of each node to one of `k` clusters, plus where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
    pub provenance: Option<GraphParams>,
    pub objective: Option<Objective>,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Param("a partition needs k >= 1".into()));
        }
        if let Some(&bad) = assignment.iter().find(|&&c| c >= k) {
            return Err(Error::Param(format!("cluster index {bad} out of range 0..{k}")));
        }
        Ok(Self {
            assignment,
            k,
            provenance: None,
            objective: None,
        })
    }

    pub fn with_provenance(mut self, params: GraphParams, objective: Option<Objective>) -> Self {
        self.provenance = Some(params);
        self.objective = objective;
        self
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn cluster_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Smallest cluster size over all `k` clusters (0 if any is empty).
    pub fn min_cluster_size(&self) -> usize {
        self.sizes().into_iter().min().unwrap_or(0)
    }

    /// Relabels clusters in order of their smallest member.
    pub fn canonical_labels(&self) -> Vec<usize> {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        self.assignment
            .iter()
            .map(|&c| {
                if map[c] == usize::MAX {
                    map[c] = next;
                    next += 1;
                }
                map[c]
            })
            .collect()
    }

    /// True when both partitions group nodes identically, whatever the labels.
    pub fn same_clusters(&self, other: &Partition) -> bool {
        self.len() == other.len() && self.canonical_labels() == other.canonical_labels()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::Shape {
                expected: n,
                actual: self.len(),
            });
        }
        Ok(())
    }

    /// `id,cluster` CSV with a header line.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("id,cluster\n");
        for (i, c) in self.assignment.iter().enumerate() {
            writeln!(out, "{i},{c}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_cluster() {
        assert!(Partition::new(vec![0, 2], 2).is_err());
    }

    #[test]
    fn canonical_relabeling() {
        let a = Partition::new(vec![2, 2, 0, 1], 3).unwrap();
        assert_eq!(a.canonical_labels(), vec![0, 0, 1, 2]);
        let b = Partition::new(vec![1, 1, 2, 0], 3).unwrap();
        assert!(a.same_clusters(&b));
        assert_eq!(a.sizes(), vec![1, 1, 2]);
        assert_eq!(a.min_cluster_size(), 1);
    }

    #[test]
    fn empty_cluster_has_size_zero() {
        let p = Partition::new(vec![0, 0, 0], 2).unwrap();
        assert_eq!(p.min_cluster_size(), 0);
    }

    #[test]
    fn csv_layout() {
        let p = Partition::new(vec![1, 0], 2).unwrap();
        assert_eq!(p.to_csv_string(), "id,cluster\n0,1\n1,0\n");
    }
}
