//! Selected eigenpairs of a symmetric tridiagonal matrix: eigenvalues by
//! Sturm-sequence bisection, eigenvectors by inverse iteration. Both cost
//! `O(m)` per pair, which keeps Lanczos convergence checks cheap.

/// Diagonal `alpha` (length `m`) and off-diagonal `beta` (length `m - 1`).
pub struct Tridiagonal<'a> {
    alpha: &'a [f64],
    beta: &'a [f64],
    scale: f64,
}

impl<'a> Tridiagonal<'a> {
    pub fn new(alpha: &'a [f64], beta: &'a [f64]) -> Self {
        assert_eq!(beta.len() + 1, alpha.len());
        let scale = alpha
            .iter()
            .chain(beta)
            .map(|x| x.abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        Self { alpha, beta, scale }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let tiny = f64::EPSILON * self.scale * 1e-3;
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let off = if i == 0 { 0.0 } else { self.beta[i - 1] * self.beta[i - 1] / q };
            q = self.alpha[i] - x - off;
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval.
    fn bounds(&self) -> (f64, f64) {
        let m = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            let r = if i > 0 { self.beta[i - 1].abs() } else { 0.0 }
                + if i + 1 < m { self.beta[i].abs() } else { 0.0 };
            lo = lo.min(self.alpha[i] - r);
            hi = hi.max(self.alpha[i] + r);
        }
        (lo, hi)
    }

    /// The `j`-th smallest eigenvalue (0-based).
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        let pad = 2.0 * f64::EPSILON * self.scale;
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Unit eigenvector for `theta`, orthogonalized against `previous`
    /// (needed when eigenvalues cluster).
    pub fn eigenvector(&self, theta: f64, previous: &[Vec<f64>]) -> Vec<f64> {
        let m = self.len();
        let mut x: Vec<f64> = (0..m).map(|i| 1.0 + ((i * 7919) % 101) as f64 * 1e-3).collect();
        let lu = TridiagLu::new(self, theta);
        for _ in 0..4 {
            lu.solve(&mut x);
            for p in previous {
                let c: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(p).for_each(|(xi, pi)| *xi -= c * pi);
            }
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 || !n.is_finite() {
                x = vec![0.0; m];
                x[m - 1] = 1.0;
                continue;
            }
            x.iter_mut().for_each(|v| *v /= n);
        }
        x
    }
}

/// LU factors of `T − θI` with partial pivoting.
struct TridiagLu {
    /// Multipliers.
    l: Vec<f64>,
    /// Upper factor: diagonal, first and second superdiagonals.
    d: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn new(t: &Tridiagonal<'_>, theta: f64) -> Self {
        let m = t.len();
        let floor = f64::EPSILON * t.scale;
        let mut d: Vec<f64> = t.alpha.iter().map(|a| a - theta).collect();
        let mut u1: Vec<f64> = t.beta.to_vec();
        u1.push(0.0);
        let mut sub: Vec<f64> = t.beta.to_vec();
        let mut u2 = vec![0.0; m];
        let mut l = vec![0.0; m];
        let mut swapped = vec![false; m];
        for i in 0..m.saturating_sub(1) {
            if sub[i].abs() > d[i].abs() {
                // Swap rows i and i + 1.
                swapped[i] = true;
                let (di, u1i) = (d[i], u1[i]);
                d[i] = sub[i];
                u1[i] = d[i + 1];
                u2[i] = u1[i + 1];
                let mult = di / d[i];
                l[i] = mult;
                d[i + 1] = u1i - mult * u1[i];
                u1[i + 1] = -mult * u2[i];
            } else {
                if d[i] == 0.0 {
                    d[i] = floor;
                }
                let mult = sub[i] / d[i];
                l[i] = mult;
                d[i + 1] -= mult * u1[i];
            }
            sub[i] = 0.0;
        }
        for di in d.iter_mut() {
            if di.abs() < floor {
                *di = if *di < 0.0 { -floor } else { floor };
            }
        }
        Self { l, d, u1, u2, swapped }
    }

    fn solve(&self, x: &mut [f64]) {
        let m = x.len();
        for i in 0..m.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.l[i] * x[i];
        }
        for i in (0..m).rev() {
            let mut s = x[i];
            if i + 1 < m {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < m {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.d[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};

    fn dense(alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let mut v: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    fn residual(alpha: &[f64], beta: &[f64], theta: f64, x: &[f64]) -> f64 {
        let m = alpha.len();
        (0..m)
            .map(|i| {
                let mut y = (alpha[i] - theta) * x[i];
                if i > 0 {
                    y += beta[i - 1] * x[i - 1];
                }
                if i + 1 < m {
                    y += beta[i] * x[i + 1];
                }
                y * y
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn matches_dense_solver() {
        let mut rng = crate::data::rng_from_seed(3);
        use rand::Rng;
        for m in [1, 2, 5, 40] {
            let alpha: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 4.0 - 1.0).collect();
            let beta: Vec<f64> = (1..m).map(|_| rng.random::<f64>()).collect();
            let t = Tridiagonal::new(&alpha, &beta);
            let expect = dense(&alpha, &beta);
            let mut prev = Vec::new();
            for (j, &e) in expect.iter().enumerate().take(4) {
                let v = t.eigenvalue(j);
                assert!((v - e).abs() < 1e-12, "m={m} j={j}: {v} vs {e}");
                let x = t.eigenvector(v, &prev);
                assert!(residual(&alpha, &beta, v, &x) < 1e-10);
                prev.push(x);
            }
        }
    }

    #[test]
    fn split_matrix_with_repeated_eigenvalues() {
        // Two identical 2x2 blocks decoupled by a zero off-diagonal.
        let alpha = [1.0, 1.0, 1.0, 1.0];
        let beta = [1.0, 0.0, 1.0];
        let t = Tridiagonal::new(&alpha, &beta);
        let a = t.eigenvalue(0);
        let b = t.eigenvalue(1);
        assert!(a.abs() < 1e-14 && b.abs() < 1e-14);
        let x = t.eigenvector(a, &[]);
        let y = t.eigenvector(b, std::slice::from_ref(&x));
        let dot: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
        assert!(dot.abs() < 1e-10);
        assert!(residual(&alpha, &beta, b, &y) < 1e-10);
    }
}
