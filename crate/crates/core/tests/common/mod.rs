#![allow(dead_code)]

use std::sync::Mutex;

use pcut::data::LabelMask;
use pcut::eigen::EigenPairs;
use pcut::spectral::{eigenpairs, Laplacian, Objective};
use pcut::ssl::harmonic_scores;
use pcut::Graph;

/// Eigenvalues at or below this count as zero.
pub const ZERO_EIGENVALUE: f64 = 1e-8;
pub const MIN_EIGENVALUE: f64 = -1e-8;
pub const MAX_RESIDUAL: f64 = 1e-6;
pub const HARMONIC_SLACK: f64 = 1e-9;

/// Running tally of spectral and harmonic checks.
#[derive(Debug, Default)]
pub struct Invariants {
    pub graphs: usize,
    pub harmonic: usize,
    pub violations: Vec<String>,
}

impl Invariants {
    pub fn new() -> Mutex<Self> {
        Mutex::new(Self::default())
    }
}

/// Smallest eigenvalue, zero multiplicity against the component count and
/// eigen-residuals for both Laplacians of `graph`.
pub fn spectral_violations(graph: &Graph, label: &str) -> Vec<String> {
    let mut out = Vec::new();
    let (_, components) = graph.components();
    let count = (components + 1).min(graph.n());
    for objective in [Objective::RCut, Objective::NCut] {
        let pairs: EigenPairs = match eigenpairs(graph, objective, count) {
            Ok(p) => p,
            Err(e) => {
                out.push(format!("{label} {objective}: eigensolver failed: {e}"));
                continue;
            }
        };
        let lap = Laplacian::new(graph, objective);
        if let Some(&min) = pairs.values.first() {
            if min < MIN_EIGENVALUE {
                out.push(format!("{label} {objective}: min eigenvalue {min:e}"));
            }
        }
        let zeros = pairs.values.iter().filter(|v| v.abs() <= ZERO_EIGENVALUE).count();
        if zeros != components {
            let certificate = (zeros == components + 1)
                .then(|| rayleigh_bound(graph, objective, &pairs.vectors[components]))
                .filter(|&r| r < ZERO_EIGENVALUE);
            let prefix = if certificate.is_some() { GRAPH_PROPERTY } else { "" };
            out.push(format!(
                "{prefix}{label} {objective}: {zeros} zero eigenvalues for {components} components (values {:?}, Rayleigh bound {certificate:?})",
                pairs.values
            ));
        }
        for (v, x) in pairs.values.iter().zip(&pairs.vectors) {
            let r = lap.residual(*v, x);
            if !(r <= MAX_RESIDUAL) {
                out.push(format!("{label} {objective}: residual {r:e} at eigenvalue {v:e}"));
            }
        }
    }
    out
}

/// Marks multiplicity mismatches that hold for the exact matrix: the graph
/// is connected only through edges so weak that its next eigenvalue is
/// provably below [`ZERO_EIGENVALUE`].
pub const GRAPH_PROPERTY: &str = "graph property: ";

/// Upper bound on the eigenvalue after the null space: the Rayleigh quotient
/// of `x` projected off the component indicators, summed edge by edge so no
/// cancellation occurs.
pub fn rayleigh_bound(graph: &Graph, objective: Objective, x: &[f64]) -> f64 {
    let n = graph.n();
    let (comp, count) = graph.components();
    let scale: Vec<f64> = match objective {
        Objective::RCut => vec![1.0; n],
        Objective::NCut => (0..n).map(|v| graph.degree(v).sqrt()).collect(),
    };
    let mut dot = vec![0.0; count];
    let mut norm = vec![0.0; count];
    for v in 0..n {
        dot[comp[v]] += x[v] * scale[v];
        norm[comp[v]] += scale[v] * scale[v];
    }
    let y: Vec<f64> = (0..n).map(|v| x[v] - dot[comp[v]] / norm[comp[v]] * scale[v]).collect();
    let energy: f64 = graph
        .edges()
        .map(|(u, v, w)| w * (y[u] / scale[u] - y[v] / scale[v]).powi(2))
        .sum();
    energy / y.iter().map(|t| t * t).sum::<f64>()
}

/// Harmonic scores must stay inside `[0, 1]` up to round-off.
pub fn harmonic_violations(graph: &Graph, mask: &LabelMask, label: &str) -> Vec<String> {
    match harmonic_scores(graph, mask) {
        Ok(f) => {
            let (lo, hi) = f.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
            if lo < -HARMONIC_SLACK || hi > 1.0 + HARMONIC_SLACK {
                vec![format!("{label}: harmonic values in [{lo:e}, {hi}]")]
            } else {
                Vec::new()
            }
        }
        Err(e) => vec![format!("{label}: harmonic solve failed: {e}")],
    }
}

pub fn check_graph(tally: &Mutex<Invariants>, graph: &Graph, label: &str) {
    let v = spectral_violations(graph, label);
    let mut t = tally.lock().unwrap();
    t.graphs += 1;
    t.violations.extend(v);
}

pub fn check_harmonic(tally: &Mutex<Invariants>, graph: &Graph, mask: &LabelMask, label: &str) {
    let v = harmonic_violations(graph, mask, label);
    let mut t = tally.lock().unwrap();
    t.harmonic += 1;
    t.violations.extend(v);
}
