//! Known densities used to check empirical quantities against their
//! population limits: the sublevel-set mass `p(y) = P{x : f(x) ≤ f(y)}`,
//! half-space masses and densities along hyperplanes.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::data::{self, Dataset, GaussianMixtureSpec};
use crate::error::{Error, Result};
use crate::quadrature;

/// A probability density on `R^d` with the operations the limit checks need.
pub trait Density: Sync {
    fn dim(&self) -> usize;

    fn pdf(&self, x: &[f64]) -> f64;

    /// `P{x : f(x) ≤ f(y)}`.
    fn pvalue(&self, y: &[f64]) -> Result<f64>;

    /// `P{x : x[axis] ≤ t}`.
    fn mass_below(&self, axis: usize, t: f64) -> f64;

    /// An interval outside of which the density is negligible along `axis`.
    fn support(&self, axis: usize) -> (f64, f64);

    fn sample(&self, n: usize, seed: u64) -> Result<Dataset>;
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// One-dimensional weighted normal components `(weight, mean, sd)`.
type Components1d = Vec<(f64, f64, f64)>;

fn mixture_1d_pdf(comps: &Components1d, x: f64) -> f64 {
    comps.iter().map(|&(a, m, s)| a * phi((x - m) / s) / s).sum()
}

/// Mass of `Σ a_j N(m_j, s_j²)` over the superlevel set `{x : g(x) > level}`.
/// The set is located by scanning a fine grid for sign changes and refining
/// every crossing by bisection.
fn superlevel_mass_1d(comps: &Components1d, level: f64) -> f64 {
    let lo = comps.iter().map(|c| c.1 - 12.0 * c.2).fold(f64::INFINITY, f64::min);
    let hi = comps.iter().map(|c| c.1 + 12.0 * c.2).fold(f64::NEG_INFINITY, f64::max);
    let min_sd = comps.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    let steps = (((hi - lo) / (min_sd / 8.0)).ceil() as usize).clamp(400, 200_000);
    let h = (hi - lo) / steps as f64;
    let g = |x: f64| mixture_1d_pdf(comps, x) - level;
    let refine = |mut a: f64, mut b: f64| {
        let ga = g(a) > 0.0;
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if (g(m) > 0.0) == ga {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let cdf_mass = |a: f64, b: f64| -> f64 {
        let n = std_normal();
        comps
            .iter()
            .map(|&(w, m, s)| w * (n.cdf((b - m) / s) - n.cdf((a - m) / s)))
            .sum()
    };
    let mut mass = 0.0;
    let mut prev_x = lo;
    let mut prev_above = g(lo) > 0.0;
    let mut start = if prev_above { Some(f64::NEG_INFINITY) } else { None };
    for i in 1..=steps {
        let x = lo + i as f64 * h;
        let above = g(x) > 0.0;
        if above != prev_above {
            let root = refine(prev_x, x);
            if above {
                start = Some(root);
            } else if let Some(a) = start.take() {
                mass += cdf_mass(a, root);
            }
        }
        prev_x = x;
        prev_above = above;
    }
    if let Some(a) = start {
        mass += cdf_mass(a, f64::INFINITY);
    }
    mass
}

impl GaussianMixtureSpec {
    fn sds(&self, c: usize) -> Vec<f64> {
        self.covariances[c].iter().map(|v| v.sqrt()).collect()
    }

    fn is_single_spherical(&self) -> bool {
        self.weights.len() == 1 && {
            let cov = &self.covariances[0];
            cov.iter().all(|&v| v == cov[0])
        }
    }

    /// The mixture restricted to the line through the remaining coordinates
    /// `fixed` (all but `free_axis`), as unnormalized 1-D components.
    fn slice_1d(&self, free_axis: usize, fixed: &[f64]) -> Components1d {
        (0..self.weights.len())
            .map(|c| {
                let sds = self.sds(c);
                let mut a = self.weights[c];
                let mut j = 0;
                for axis in 0..self.dim() {
                    if axis == free_axis {
                        continue;
                    }
                    let s = sds[axis];
                    a *= phi((fixed[j] - self.means[c][axis]) / s) / s;
                    j += 1;
                }
                (a, self.means[c][free_axis], sds[free_axis])
            })
            .collect()
    }
}

impl Density for GaussianMixtureSpec {
    fn dim(&self) -> usize {
        GaussianMixtureSpec::dim(self)
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        (0..self.weights.len())
            .map(|c| {
                let sds = self.sds(c);
                let mut v = self.weights[c];
                for (j, &xj) in x.iter().enumerate() {
                    v *= phi((xj - self.means[c][j]) / sds[j]) / sds[j];
                }
                v
            })
            .sum()
    }

    /// Closed form for a single spherical component (a χ² tail), exact
    /// interval masses in one dimension, nested quadrature in two and a
    /// fixed-seed Monte Carlo average beyond.
    fn pvalue(&self, y: &[f64]) -> Result<f64> {
        self.validate()?;
        let d = self.dim();
        if y.len() != d {
            return Err(Error::Shape {
                expected: d,
                actual: y.len(),
            });
        }
        if self.is_single_spherical() {
            let var = self.covariances[0][0];
            let r2: f64 = y
                .iter()
                .zip(&self.means[0])
                .map(|(a, m)| (a - m) * (a - m))
                .sum::<f64>()
                / var;
            let chi = ChiSquared::new(d as f64).map_err(|e| Error::Numerical(e.to_string()))?;
            return Ok(chi.sf(r2).clamp(0.0, 1.0));
        }
        let level = self.pdf(y);
        let p = match d {
            1 => {
                let comps = self.slice_1d(0, &[]);
                1.0 - superlevel_mass_1d(&comps, level)
            }
            2 => {
                // Outer integral over x₀ of the inner superlevel mass along x₁.
                let (lo, hi) = self.support(0);
                let inner = |x0: f64| superlevel_mass_1d(&self.slice_1d(1, &[x0]), level);
                1.0 - quadrature::integrate(inner, lo, hi, 1e-8)?
            }
            _ => {
                const DRAWS: usize = 200_000;
                let ds = data::sample_gaussian_mixture(self, DRAWS, 0x5eed)?;
                let below = ds.points().filter(|x| self.pdf(x) <= level).count();
                below as f64 / DRAWS as f64
            }
        };
        Ok(p.clamp(0.0, 1.0))
    }

    fn mass_below(&self, axis: usize, t: f64) -> f64 {
        let n = std_normal();
        (0..self.weights.len())
            .map(|c| {
                let s = self.covariances[c][axis].sqrt();
                self.weights[c] * n.cdf((t - self.means[c][axis]) / s)
            })
            .sum()
    }

    fn support(&self, axis: usize) -> (f64, f64) {
        let lo = (0..self.weights.len())
            .map(|c| self.means[c][axis] - 12.0 * self.covariances[c][axis].sqrt())
            .fold(f64::INFINITY, f64::min);
        let hi = (0..self.weights.len())
            .map(|c| self.means[c][axis] + 12.0 * self.covariances[c][axis].sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        data::sample_gaussian_mixture(self, n, seed)
    }
}

/// Uniform density on the box `[lo, hi]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformBox {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
}

impl UniformBox {
    pub fn unit(dim: usize) -> Self {
        Self { dim, lo: 0.0, hi: 1.0 }
    }

    fn inside(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| v >= self.lo && v <= self.hi)
    }
}

impl Density for UniformBox {
    fn dim(&self) -> usize {
        self.dim
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        if self.inside(x) {
            (self.hi - self.lo).powi(self.dim as i32).recip()
        } else {
            0.0
        }
    }

    fn pvalue(&self, y: &[f64]) -> Result<f64> {
        Ok(if self.inside(y) { 1.0 } else { 0.0 })
    }

    fn mass_below(&self, _axis: usize, t: f64) -> f64 {
        ((t - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn support(&self, _axis: usize) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        use rand::Rng;
        let mut rng = data::rng_from_seed(seed);
        let coords = (0..n * self.dim)
            .map(|_| self.lo + (self.hi - self.lo) * rng.random::<f64>())
            .collect();
        Dataset::from_flat(coords, self.dim, None)
    }
}
