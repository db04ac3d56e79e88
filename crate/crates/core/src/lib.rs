//! Clustering and semi-supervised learning on imbalanced data.
//!
//! Candidate partitions come from spectral clustering (or label propagation)
//! on a grid of rank-modulated-degree graphs. Among the candidates whose
//! clusters all hold at least `⌈δn⌉` nodes, the one with the smallest cut on a
//! fixed baseline k-NN graph wins.
//!
//! ```
//! use pcut::data::Generator;
//! use pcut::pcut::{run_pcut, PCutConfig, SearchGrid};
//!
//! let ds = Generator::Fig2.sample(200, 7).unwrap();
//! let mut grid = SearchGrid::standard(ds.len());
//! grid.lambdas = vec![0.0, 1.0];
//! grid.ks = vec![10, 20];
//! grid.sigma_multipliers = vec![None];
//! let report = run_pcut(&ds, &grid, &PCutConfig::new(2, 7), 0.05, None).unwrap();
//! let best = report.selected_candidate().unwrap();
//! assert!(best.entry.min_cluster_size >= 10);
//! ```

pub mod analysis;
pub mod cli;
pub mod data;
pub mod density;
pub mod eigen;
pub mod error;
pub mod graph;
pub mod kmeans;
pub mod metrics;
pub mod partition;
pub mod pcut;
pub mod quadrature;
pub mod rank;
pub mod spectral;
pub mod ssl;
pub mod tridiag;

pub use error::{Error, Result};
pub use graph::{Graph, GraphKind, GraphParams};
pub use partition::Partition;
pub use spectral::Objective;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/data.md")]
mod book_data {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/ranks.md")]
mod book_ranks {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/graphs.md")]
mod book_graphs {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/spectral.md")]
mod book_spectral {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/ssl.md")]
mod book_ssl {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/pcut.md")]
mod book_pcut {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/analysis.md")]
mod book_analysis {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
