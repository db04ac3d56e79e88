//! Datasets, label masks, CSV ingestion and the synthetic generators used by
//! the experiments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seedable generator used for every random stream in the crate. ChaCha8 is
/// specified bit-for-bit, so seeds reproduce across platforms.
pub type Rng64 = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` points in `R^d`, stored row-major, with optional ground-truth labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    coords: Vec<f64>,
    dim: usize,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset from point rows. All rows must share one dimension.
    pub fn new(points: Vec<Vec<f64>>, labels: Option<Vec<usize>>) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::TooFewPoints(n));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::Param("points must have dimension >= 1".into()));
        }
        let mut coords = Vec::with_capacity(n * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Parse {
                    row: i + 1,
                    msg: format!("expected {dim} coordinates, found {}", p.len()),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(coords, dim, labels)
    }

    /// Builds a dataset from a row-major coordinate buffer.
    pub fn from_flat(coords: Vec<f64>, dim: usize, labels: Option<Vec<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Param("points must have dimension >= 1".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::Shape {
                expected: (coords.len() / dim + 1) * dim,
                actual: coords.len(),
            });
        }
        let n = coords.len() / dim;
        if n < 2 {
            return Err(Error::TooFewPoints(n));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    actual: l.len(),
                });
            }
        }
        Ok(Self { coords, dim, labels })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct classes, taken as `max label + 1`.
    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    /// Euclidean distance between points `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        squared_distance(self.point(i), self.point(j)).sqrt()
    }

    /// Returns a copy with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coords: self.coords.iter().map(|c| c * factor).collect(),
            dim: self.dim,
            labels: self.labels.clone(),
        }
    }

    /// Writes the dataset as CSV text (one point per row, label last if present).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.points().enumerate() {
            for (j, c) in p.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                // Debug formatting is the shortest text that parses back to the same f64.
                write!(out, "{c:?}").unwrap();
            }
            if let Some(l) = &self.labels {
                write!(out, ",{}", l[i]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    /// The final column holds an integer class label.
    pub has_labels: bool,
    /// Skip the first line.
    pub header: bool,
}

/// Reads a dataset from a comma-separated file.
pub fn load_csv(path: impl AsRef<Path>, opts: CsvOptions) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, opts)
}

/// Parses CSV text; row numbers in errors are 1-based file lines.
pub fn parse_csv(text: &str, opts: CsvOptions) -> Result<Dataset> {
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        if opts.header && idx == 0 {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let n_float = if opts.has_labels {
            if cells.len() < 2 {
                return Err(Error::Parse {
                    row,
                    msg: "expected at least one coordinate and a label".into(),
                });
            }
            cells.len() - 1
        } else {
            cells.len()
        };
        match dim {
            None => dim = Some(n_float),
            Some(d) if d != n_float => {
                return Err(Error::Parse {
                    row,
                    msg: format!("expected {d} coordinates, found {n_float}"),
                })
            }
            _ => {}
        }
        for cell in &cells[..n_float] {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                msg: format!("non-numeric cell {cell:?}"),
            })?;
            coords.push(v);
        }
        if opts.has_labels {
            let cell = cells[n_float];
            let l: usize = cell.parse().map_err(|_| Error::Parse {
                row,
                msg: format!("label {cell:?} is not a non-negative integer"),
            })?;
            labels.push(l);
        }
    }
    let dim = dim.ok_or(Error::TooFewPoints(0))?;
    if coords.len() / dim.max(1) < 2 {
        return Err(Error::TooFewPoints(coords.len() / dim.max(1)));
    }
    Dataset::from_flat(coords, dim, opts.has_labels.then_some(labels))
}

/// A set of labeled seed nodes for semi-supervised learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMask {
    labels: BTreeMap<usize, usize>,
}

impl LabelMask {
    /// `pairs` are `(node id, class)`; ids must be `< n` and every class in
    /// `0..num_classes` must be seeded at least once.
    pub fn new(
        pairs: impl IntoIterator<Item = (usize, usize)>,
        n: usize,
        num_classes: usize,
    ) -> Result<Self> {
        let labels: BTreeMap<usize, usize> = pairs.into_iter().collect();
        if labels.is_empty() {
            return Err(Error::Data("label mask is empty".into()));
        }
        if let Some((&id, _)) = labels.iter().find(|(&id, _)| id >= n) {
            return Err(Error::Data(format!("labeled id {id} out of range 0..{n}")));
        }
        if let Some((_, &c)) = labels.iter().find(|(_, &c)| c >= num_classes) {
            return Err(Error::Data(format!("class {c} out of range 0..{num_classes}")));
        }
        for class in 0..num_classes {
            if !labels.values().any(|&c| c == class) {
                return Err(Error::Data(format!("class {class} has no labeled node")));
            }
        }
        Ok(Self { labels })
    }

    /// Picks `count` labeled nodes at random from a dataset with ground truth,
    /// guaranteeing one seed per class.
    pub fn random(dataset: &Dataset, count: usize, seed: u64) -> Result<Self> {
        let truth = dataset
            .labels()
            .ok_or_else(|| Error::Data("dataset has no ground-truth labels".into()))?;
        let k = dataset.num_classes().unwrap_or(0);
        let n = dataset.len();
        let mut rng = rng_from_seed(seed);
        let mut chosen = BTreeMap::new();
        for class in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| truth[i] == class).collect();
            if members.is_empty() {
                continue;
            }
            let id = members[rng.random_range(0..members.len())];
            chosen.insert(id, class);
        }
        let mut pool: Vec<usize> = (0..n).filter(|i| !chosen.contains_key(i)).collect();
        while chosen.len() < count.min(n) && !pool.is_empty() {
            let id = pool.swap_remove(rng.random_range(0..pool.len()));
            chosen.insert(id, truth[id]);
        }
        Self::new(chosen, n, k)
    }

    pub fn load_csv(path: impl AsRef<Path>, n: usize, num_classes: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut pairs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line.starts_with("id")) {
                continue;
            }
            let mut it = line.split(',').map(str::trim);
            let parse = |s: Option<&str>| -> Result<usize> {
                s.and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
                    row: idx + 1,
                    msg: "expected \"id,class\"".into(),
                })
            };
            let id = parse(it.next())?;
            let class = parse(it.next())?;
            pairs.push((id, class));
        }
        Self::new(pairs, n, num_classes)
    }

    pub fn get(&self, id: usize) -> Option<usize> {
        self.labels.get(&id).copied()
    }

    pub fn is_labeled(&self, id: usize) -> bool {
        self.labels.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labels.iter().map(|(&a, &b)| (a, b))
    }

    /// Class index count implied by the seeds.
    pub fn num_classes(&self) -> usize {
        self.labels.values().copied().max().map_or(0, |m| m + 1)
    }
}

/// A Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Diagonal of each component's covariance matrix.
    pub covariances: Vec<Vec<f64>>,
}

impl GaussianMixtureSpec {
    pub fn validate(&self) -> Result<()> {
        let m = self.weights.len();
        if m == 0 || self.means.len() != m || self.covariances.len() != m {
            return Err(Error::Spec(
                "weights, means and covariances must be nonempty and of equal length".into(),
            ));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Spec("weights must be strictly positive".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Spec(format!("weights sum to {total}, not 1")));
        }
        let d = self.means[0].len();
        if d == 0 {
            return Err(Error::Spec("dimension must be >= 1".into()));
        }
        for (mu, cov) in self.means.iter().zip(&self.covariances) {
            if mu.len() != d || cov.len() != d {
                return Err(Error::Spec("component dimensions disagree".into()));
            }
            if cov.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Spec("variances must be strictly positive".into()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Two-component mixture with proportions 0.85/0.15: a wide cluster at
    /// (4.5, 0) and a small unit-covariance cluster at the origin.
    pub fn imbalanced_pair() -> Self {
        Self {
            weights: vec![0.85, 0.15],
            means: vec![vec![4.5, 0.0], vec![0.0, 0.0]],
            covariances: vec![vec![2.0, 1.0], vec![1.0, 1.0]],
        }
    }

    /// Three proximal components along the first axis in proportions 2:8:1.
    pub fn small_cluster_triple() -> Self {
        Self {
            weights: vec![2.0 / 11.0, 8.0 / 11.0, 1.0 / 11.0],
            means: vec![vec![-0.7, 0.0], vec![4.5, 0.0], vec![9.7, 0.0]],
            covariances: vec![vec![1.0, 1.0], vec![2.0, 1.0], vec![0.7, 0.7]],
        }
    }

    /// Standard normal in `d` dimensions.
    pub fn standard_normal(d: usize) -> Self {
        Self {
            weights: vec![1.0],
            means: vec![vec![0.0; d]],
            covariances: vec![vec![1.0; d]],
        }
    }
}

/// Draws `n` i.i.d. points; the component index becomes the true label.
pub fn sample_gaussian_mixture(spec: &GaussianMixtureSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let d = spec.dim();
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let last = spec.weights.len() - 1;
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut comp = last;
        for (c, w) in spec.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                comp = c;
                break;
            }
        }
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            coords.push(spec.means[comp][j] + spec.covariances[comp][j].sqrt() * z);
        }
        labels.push(comp);
    }
    Dataset::from_flat(coords, d, Some(labels))
}

/// Splits `n` into integer counts proportional to `fractions` using the
/// largest-remainder rule (ties go to the lower index).
pub fn largest_remainder_counts(n: usize, fractions: &[f64]) -> Vec<usize> {
    let total: f64 = fractions.iter().sum();
    let exact: Vec<f64> = fractions.iter().map(|f| f / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Two interleaving half-circles (45% each) plus a small Gaussian blob (10%)
/// to the right of the second moon. Labels: 0 and 1 for the moons, 2 for the blob.
pub fn sample_two_moons_plus_gaussian(n: usize, seed: u64) -> Result<Dataset> {
    if n < 3 {
        return Err(Error::Param(format!("need n >= 3, got {n}")));
    }
    const NOISE: f64 = 0.1;
    const BLOB_CENTER: [f64; 2] = [2.5, 0.5];
    let blob_sd = 0.1f64.sqrt();
    let counts = largest_remainder_counts(n, &[0.45, 0.45, 0.10]);
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    let noise = |rng: &mut Rng64, sd: f64| sd * rng.sample::<f64, _>(StandardNormal);
    for _ in 0..counts[0] {
        let t = rng.random::<f64>() * std::f64::consts::PI;
        let x = t.cos() + noise(&mut rng, NOISE);
        let y = t.sin() + noise(&mut rng, NOISE);
        coords.extend([x, y]);
        labels.push(0);
    }
    for _ in 0..counts[1] {
        let t = rng.random::<f64>() * std::f64::consts::PI;
        let x = 1.0 - t.cos() + noise(&mut rng, NOISE);
        let y = 0.5 - t.sin() + noise(&mut rng, NOISE);
        coords.extend([x, y]);
        labels.push(1);
    }
    for _ in 0..counts[2] {
        let x = BLOB_CENTER[0] + noise(&mut rng, blob_sd);
        let y = BLOB_CENTER[1] + noise(&mut rng, blob_sd);
        coords.extend([x, y]);
        labels.push(2);
    }
    Dataset::from_flat(coords, 2, Some(labels))
}

/// Named synthetic generators exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// [`GaussianMixtureSpec::imbalanced_pair`]
    Fig2,
    /// [`GaussianMixtureSpec::small_cluster_triple`]
    Fig5,
    /// [`sample_two_moons_plus_gaussian`]
    Moons,
}

impl Generator {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "fig2" => Ok(Self::Fig2),
            "fig5" => Ok(Self::Fig5),
            "moons" => Ok(Self::Moons),
            other => Err(Error::Param(format!(
                "unknown generator {other:?} (expected fig2, fig5 or moons)"
            ))),
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            Self::Fig2 => 2,
            Self::Fig5 | Self::Moons => 3,
        }
    }

    pub fn sample(self, n: usize, seed: u64) -> Result<Dataset> {
        match self {
            Self::Fig2 => sample_gaussian_mixture(&GaussianMixtureSpec::imbalanced_pair(), n, seed),
            Self::Fig5 => {
                sample_gaussian_mixture(&GaussianMixtureSpec::small_cluster_triple(), n, seed)
            }
            Self::Moons => sample_two_moons_plus_gaussian(n, seed),
        }
    }
}
