//! Sparse symmetric storage and linear solvers.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};
use thiserror::Error;

use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("CG did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Sparse Cholesky with one step of iterative refinement.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T: Real> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Sums duplicate entries. The summation order follows the input order, so
    /// the result is reproducible for a fixed triplet sequence.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len() / 4);
        let mut values: Vec<T> = Vec::with_capacity(triplets.len() / 4);
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                cols.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[a..b].binary_search(&j) {
            Ok(p) => self.values[a + p],
            Err(_) => T::zero(),
        }
    }

    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).fold(T::zero(), |acc, (j, v)| acc + v * x[j]);
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.n)
            .map(|i| self.row(i).fold(T::zero(), |a, (_, v)| a + v.abs()))
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<T> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve<T: Real>(a: &CsrMatrix<T>, b: &[T], kind: SolverKind) -> Result<Vec<T>, SolveError> {
    match kind {
        SolverKind::Direct => solve_direct(a, b),
        SolverKind::Cg => solve_cg(a, b, lit(1e-12), 20 * a.n.max(100)),
    }
}

/// Sparse Cholesky in double precision, followed by one refinement step.
pub fn solve_direct<T: Real>(a: &CsrMatrix<T>, b: &[T]) -> Result<Vec<T>, SolveError> {
    let n = a.n;
    if n == 0 {
        return Ok(Vec::new());
    }
    // lower triangle of a symmetric CSR matrix = upper triangle of its transpose, read column-wise
    let mut trips = Vec::with_capacity(a.nnz() / 2 + n);
    for i in 0..n {
        for (j, v) in a.row(i) {
            if j <= i {
                trips.push(Triplet::new(i, j, to_f64(v)));
            }
        }
    }
    // faer's parallel kernels partition work by the size of the current rayon pool, which
    // changes the rounding; the factorization is kept sequential so results do not depend on it
    faer::set_global_parallelism(Par::Seq);
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| SolveError::Factorization(format!("{e:?}")))?;
    let llt = m.sp_cholesky(Side::Lower).map_err(|_| SolveError::NotPositiveDefinite)?;
    let mut x = Mat::<f64>::from_fn(n, 1, |i, _| to_f64(b[i]));
    llt.solve_in_place(x.as_mut());
    let xs: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NotPositiveDefinite);
    }
    // refinement: r = b - A x, x += A⁻¹ r
    let mut r = Mat::<f64>::zeros(n, 1);
    for i in 0..n {
        let ax: f64 = a.row(i).map(|(j, v)| to_f64(v) * xs[j]).sum();
        r[(i, 0)] = to_f64(b[i]) - ax;
    }
    llt.solve_in_place(r.as_mut());
    Ok((0..n).map(|i| lit(xs[i] + r[(i, 0)])).collect())
}

/// Jacobi-preconditioned conjugate gradients with relative residual tolerance `tol`.
pub fn solve_cg<T: Real>(a: &CsrMatrix<T>, b: &[T], tol: T, max_iter: usize) -> Result<Vec<T>, SolveError> {
    let n = a.n;
    let diag = a.diagonal();
    if diag.iter().any(|d| !(*d > T::zero())) {
        return Err(SolveError::NotPositiveDefinite);
    }
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let bnorm = dot(b, b).sqrt();
    if bnorm == T::zero() {
        return Ok(x);
    }
    let mut z: Vec<T> = r.iter().zip(&diag).map(|(r, d)| *r / *d).collect();
    let mut p = z.clone();
    let mut ap = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(SolveError::NotPositiveDefinite);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            log::debug!("CG converged in {} iterations", it + 1);
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::NoConvergence {
        iterations: max_iter,
        residual: to_f64(dot(&r, &r).sqrt() / bnorm),
    })
}
