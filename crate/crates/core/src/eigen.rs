//! Smallest eigenpairs of graph Laplacians.
//!
//! The null space of a Laplacian is known exactly from the connected
//! components, so it is never computed numerically: component indicator
//! vectors (scaled by `D^{1/2}` for the normalized Laplacian) are returned
//! as eigenvalue-0 pairs, and the remaining pairs are found in their
//! orthogonal complement. Small problems use a dense symmetric solver. Larger
//! ones use Lanczos with full reorthogonalization, first on `L` itself and,
//! if that stalls (tiny kernel widths leave a cluster of near-zero
//! eigenvalues), on the shifted inverse `(L + sQQᵀ + τI)⁻¹` via a dense
//! Cholesky factorization.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::Rng;

use crate::data::rng_from_seed;
use crate::error::{Error, Result};
use crate::spectral::Laplacian;
use crate::tridiag::Tridiagonal;

/// Problems with at most this many nodes use the dense solver.
pub const DENSE_LIMIT: usize = 300;

/// Lanczos stops once every wanted Ritz residual estimate is below this
/// fraction of the operator norm bound (clamped to `[1e-9, 1e-7]`).
pub const LANCZOS_TOL: f64 = 1e-9;

/// Largest true residual `‖Lv − μv‖` accepted for a returned pair.
pub const RESIDUAL_LIMIT: f64 = 1e-6;

/// Residual at which an iterative pair is accepted; kept below
/// [`RESIDUAL_LIMIT`] for margin.
const ACCEPT_RESIDUAL: f64 = 1e-8;

pub const MAX_LANCZOS_ITERATIONS: usize = 5000;

/// Plain Lanczos iterations allowed before switching to shift-invert.
pub const PLAIN_BUDGET: usize = 100;

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors, one per value.
    pub vectors: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthonormal basis of the Laplacian null space, largest component first
/// (ties by smallest member).
pub fn null_space_basis(lap: &Laplacian<'_>) -> Vec<Vec<f64>> {
    let g = lap.graph();
    let n = g.n();
    let (comp, count) = g.components();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for v in 0..n {
        members[comp[v]].push(v);
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| members[b].len().cmp(&members[a].len()).then(a.cmp(&b)));
    let mut basis = Vec::new();
    for c in order {
        let mut vec = vec![0.0; n];
        match lap.objective() {
            crate::spectral::Objective::RCut => {
                for &v in &members[c] {
                    vec[v] = 1.0;
                }
            }
            crate::spectral::Objective::NCut => {
                for &v in &members[c] {
                    vec[v] = lap.degree(v).sqrt();
                }
            }
        }
        let nrm = norm(&vec);
        // A zero-volume component (isolated node) has no null vector in the
        // normalized Laplacian.
        if nrm > 0.0 {
            vec.iter_mut().for_each(|x| *x /= nrm);
            basis.push(vec);
        }
    }
    basis
}

/// The `count` smallest eigenpairs of `lap`.
pub fn smallest_eigenpairs(lap: &Laplacian<'_>, count: usize) -> Result<EigenPairs> {
    let n = lap.n();
    if count == 0 || count > n {
        return Err(Error::Param(format!("cannot take {count} eigenpairs of an {n}-node graph")));
    }
    let null = null_space_basis(lap);
    let from_null = null.len().min(count);
    let mut values = vec![0.0; from_null];
    let mut vectors: Vec<Vec<f64>> = null[..from_null].to_vec();
    let rest = count - from_null;
    if rest > 0 {
        let extra = if n <= DENSE_LIMIT {
            dense_complement(lap, &null, rest)?
        } else {
            lanczos_complement(lap, &null, rest)?
        };
        values.extend(extra.values);
        vectors.extend(extra.vectors);
    }
    Ok(EigenPairs { values, vectors })
}

/// `L + sQQᵀ + τI` with `s` beyond the spectrum, so the null space moves to
/// the top.
fn deflated_dense(lap: &Laplacian<'_>, null: &[Vec<f64>], tau: f64) -> DMatrix<f64> {
    let n = lap.n();
    let mut m = lap.to_dense();
    let shift = 2.0 * lap.norm_bound() + 1.0;
    for q in null {
        for i in 0..n {
            if q[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                m[(i, j)] += shift * q[i] * q[j];
            }
        }
    }
    for i in 0..n {
        m[(i, i)] += tau;
    }
    m
}

/// Dense solve with the null space shifted above the spectrum.
fn dense_complement(lap: &Laplacian<'_>, null: &[Vec<f64>], count: usize) -> Result<EigenPairs> {
    let n = lap.n();
    let eig = SymmetricEigen::new(deflated_dense(lap, null, 0.0));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let available = n - null.len();
    if count > available {
        return Err(Error::Param(format!(
            "only {available} eigenpairs lie outside the null space"
        )));
    }
    let mut values = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    for &i in order.iter().take(count) {
        values.push(eig.eigenvalues[i]);
        vectors.push(eig.eigenvectors.column(i).iter().copied().collect());
    }
    Ok(EigenPairs { values, vectors })
}

fn orthogonalize(w: &mut [f64], against: &[Vec<f64>]) {
    // Two passes of classical Gram–Schmidt restore orthogonality to working precision.
    for _ in 0..2 {
        for q in against {
            let c = dot(q, w);
            if c != 0.0 {
                axpy(-c, q, w);
            }
        }
    }
}

/// A fresh unit vector orthogonal to `null` and `basis`, or `None` once
/// they span the whole space.
fn fresh_direction(
    n: usize,
    null: &[Vec<f64>],
    basis: &[Vec<f64>],
    rng: &mut crate::data::Rng64,
) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let before = norm(&v);
        orthogonalize(&mut v, null);
        orthogonalize(&mut v, basis);
        let after = norm(&v);
        if after > 1e-8 * before {
            v.iter_mut().for_each(|x| *x /= after);
            return Some(v);
        }
    }
    None
}

/// Which end of the operator spectrum Lanczos should resolve.
#[derive(Clone, Copy, PartialEq)]
enum End {
    Smallest,
    Largest,
}

/// Ritz values and vectors from Lanczos on `apply`, restricted to the
/// complement of `null`. A pair is accepted once the residual estimate
/// `|β_m y_m|` drops below `tol(θ)` and `verify(θ, v)` holds for the Ritz
/// vector. `None` if `max_iter` passes first.
#[allow(clippy::too_many_arguments)]
fn lanczos<A, T, V>(
    n: usize,
    apply: A,
    null: &[Vec<f64>],
    count: usize,
    end: End,
    scale: f64,
    tol: T,
    verify: V,
    max_iter: usize,
) -> Result<Option<(Vec<f64>, Vec<Vec<f64>>)>>
where
    A: Fn(&[f64], &mut [f64]),
    T: Fn(f64) -> f64,
    V: Fn(f64, &[f64]) -> bool,
{
    let mut rng = rng_from_seed(0x1a9c_205e);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut q = fresh_direction(n, null, &basis, &mut rng)
        .ok_or_else(|| Error::Numerical("no starting vector outside the null space".into()))?;
    let mut w = vec![0.0; n];
    let full = n - null.len();
    let mut next_check = (count + 10).min(max_iter);

    loop {
        apply(&q, &mut w);
        let a = dot(&q, &w);
        axpy(-a, &q, &mut w);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            axpy(-b, prev, &mut w);
        }
        basis.push(q);
        alpha.push(a);
        orthogonalize(&mut w, null);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);
        let m = basis.len();
        let breakdown = b <= 1e-12 * scale;
        let complete = m >= full;

        if m >= count && (m >= next_check || m >= max_iter || breakdown) {
            let t = Tridiagonal::new(&alpha, &beta);
            let mut thetas = Vec::with_capacity(count);
            let mut ys: Vec<Vec<f64>> = Vec::with_capacity(count);
            for j in 0..count {
                let idx = match end {
                    End::Smallest => j,
                    End::Largest => m - 1 - j,
                };
                let theta = t.eigenvalue(idx);
                ys.push(t.eigenvector(theta, &ys));
                thetas.push(theta);
            }
            let estimated = complete
                || thetas
                    .iter()
                    .zip(&ys)
                    .all(|(&theta, y)| (b * y[m - 1]).abs() <= tol(theta));
            if estimated {
                let vectors: Vec<Vec<f64>> = ys
                    .iter()
                    .map(|y| {
                        let mut v = vec![0.0; n];
                        for (j, qj) in basis.iter().enumerate() {
                            axpy(y[j], qj, &mut v);
                        }
                        let nrm = norm(&v);
                        v.iter_mut().for_each(|x| *x /= nrm);
                        v
                    })
                    .collect();
                if complete || thetas.iter().zip(&vectors).all(|(&t, v)| verify(t, v)) {
                    return Ok(Some((thetas, vectors)));
                }
            }
            if m >= max_iter {
                return Ok(None);
            }
            next_check = m + 5 + m / 20;
        }

        if breakdown {
            // Invariant subspace found; continue in a new direction. The zero
            // coupling keeps T block diagonal.
            match fresh_direction(n, null, &basis, &mut rng) {
                Some(v) => {
                    beta.push(0.0);
                    q = v;
                }
                None => return Err(Error::Numerical("Krylov space exhausted early".into())),
            }
        } else {
            w.iter_mut().for_each(|x| *x /= b);
            beta.push(b);
            q = std::mem::replace(&mut w, vec![0.0; n]);
        }
    }
}

fn checked(lap: &Laplacian<'_>, values: Vec<f64>, vectors: Vec<Vec<f64>>) -> Result<EigenPairs> {
    for (&value, v) in values.iter().zip(&vectors) {
        let r = lap.residual(value, v);
        if !(r <= RESIDUAL_LIMIT) {
            return Err(Error::Numerical(format!("eigenpair residual {r:e} above {RESIDUAL_LIMIT:e}")));
        }
    }
    Ok(EigenPairs { values, vectors })
}

/// Iterative solve in the complement of `null`, one pair at a time. Each
/// found vector is locked (added to the deflation set) before the next run,
/// so repeated eigenvalues are recovered with their multiplicity. Plain
/// Lanczos gets [`PLAIN_BUDGET`] iterations per pair; past that the solver
/// switches to shift-invert for the rest.
fn lanczos_complement(lap: &Laplacian<'_>, null: &[Vec<f64>], count: usize) -> Result<EigenPairs> {
    let n = lap.n();
    let dim = n - null.len();
    if count > dim {
        return Err(Error::Param(format!("only {dim} eigenpairs lie outside the null space")));
    }
    let scale = lap.norm_bound().max(1.0);
    let tol = (LANCZOS_TOL * scale).clamp(1e-9, 1e-7);
    let mut locked: Vec<Vec<f64>> = null.to_vec();
    let mut values = Vec::with_capacity(count);
    let mut inverse: Option<ShiftInvert> = None;
    for _ in 0..count {
        let free = n - locked.len();
        let found = match &inverse {
            None => lanczos(
                n,
                |x, y| lap.apply(x, y),
                &locked,
                1,
                End::Smallest,
                scale,
                |_| tol,
                |theta, v| lap.residual(theta, v) <= ACCEPT_RESIDUAL,
                PLAIN_BUDGET.min(free),
            )?,
            Some(_) => None,
        };
        let (value, vector) = match found {
            Some((mut v, mut x)) => (v.remove(0), x.remove(0)),
            None => {
                if inverse.is_none() {
                    inverse = Some(ShiftInvert::new(lap, null, tol)?);
                }
                inverse.as_ref().unwrap().smallest(lap, &locked, tol, free)?
            }
        };
        values.push(value);
        locked.push(vector);
    }
    let vectors = locked.split_off(null.len());
    // Locking finds pairs in ascending order up to rounding; sort to be exact.
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    checked(
        lap,
        order.iter().map(|&i| values[i]).collect(),
        order.iter().map(|&i| vectors[i].clone()).collect(),
    )
}

/// Cholesky factor of `L + sQQᵀ + τI` for Lanczos on its inverse.
struct ShiftInvert {
    chol: Cholesky<f64, nalgebra::Dyn>,
    tau: f64,
}

impl ShiftInvert {
    fn new(lap: &Laplacian<'_>, null: &[Vec<f64>], tol: f64) -> Result<Self> {
        let mut tau = tol;
        loop {
            if let Some(chol) = Cholesky::new(deflated_dense(lap, null, tau)) {
                return Ok(Self { chol, tau });
            }
            tau *= 100.0;
            if tau > 1e-3 * lap.norm_bound().max(1.0) {
                return Err(Error::Numerical("shifted Laplacian is not positive definite".into()));
            }
        }
    }

    fn smallest(
        &self,
        lap: &Laplacian<'_>,
        locked: &[Vec<f64>],
        tol: f64,
        free: usize,
    ) -> Result<(f64, Vec<f64>)> {
        let n = self.chol.l_dirty().nrows();
        let apply = |x: &[f64], y: &mut [f64]| {
            let mut v = nalgebra::DVector::from_column_slice(x);
            self.chol.solve_mut(&mut v);
            y.copy_from_slice(v.as_slice());
        };
        // θ = 1/(λ+τ). The estimate only prefilters; acceptance checks the
        // residual in `L` itself.
        let (mut thetas, mut vectors) = lanczos(
            n,
            apply,
            locked,
            1,
            End::Largest,
            1.0 / self.tau,
            |theta| tol * theta,
            |theta, v| lap.residual(1.0 / theta - self.tau, v) <= ACCEPT_RESIDUAL,
            free.min(MAX_LANCZOS_ITERATIONS),
        )?
        .ok_or_else(|| Error::Numerical("shift-invert Lanczos did not converge".into()))?;
        Ok((1.0 / thetas.remove(0) - self.tau, vectors.remove(0)))
    }
}
