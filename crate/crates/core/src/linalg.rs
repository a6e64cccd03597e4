//! Small dense linear algebra.
//!
//! The estimators only ever handle `(p+1) x (p+1)` systems, so everything here
//! is a straightforward row-major implementation: Cholesky solves with diagonal
//! equilibration, cyclic Jacobi for symmetric eigenproblems, and power
//! iteration for spectral norms of (possibly implicit) operators.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{ArchError, Result};
use crate::scalar::Scalar;

/// Condition-number ceiling above which a symmetric system is reported singular.
pub fn max_condition<T: Scalar>() -> T {
    T::lit(1e12).min(T::one() / (T::epsilon() * T::lit(100.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self { rows: rows.len(), cols, data: rows.iter().flatten().copied().collect() }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, k: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * k).collect() }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `self += k * a b^T`.
    pub fn add_outer(&mut self, a: &[T], b: &[T], k: T) {
        debug_assert_eq!((a.len(), b.len()), (self.rows, self.cols));
        for (i, &ai) in a.iter().enumerate() {
            let ai = ai * k;
            for (j, &bj) in b.iter().enumerate() {
                self[(i, j)] = self[(i, j)] + ai * bj;
            }
        }
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square());
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * half)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&a| a * a).sum::<T>().sqrt()
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> T {
        assert!(self.is_square());
        let scale = self.max_abs();
        if scale == T::zero() {
            return T::zero();
        }
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// Eigen-decomposition of the symmetric part by cyclic Jacobi rotations.
    ///
    /// Eigenvalues come back in ascending order; eigenvectors are the columns
    /// of the returned matrix in the same order.
    pub fn sym_eigen(&self) -> (Vec<T>, Matrix<T>) {
        let n = self.rows;
        let mut a = self.symmetrized();
        let mut v = Matrix::identity(n);
        let total = a.frobenius_norm();
        if total == T::zero() {
            return (vec![T::zero(); n], v);
        }
        let tiny = T::epsilon() * T::epsilon() * total * total;
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in i + 1..n {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
            if off <= tiny {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                    let t = if theta.abs() > T::lit(1e150).min(T::max_value().sqrt()) {
                        T::one() / (T::lit(2.0) * theta)
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                    };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.sym_eigen().0.first().copied().unwrap_or(T::zero())
    }

    /// Condition number of a symmetric positive-definite matrix after scaling
    /// it to unit diagonal. Returns infinity when the matrix is not PD.
    pub fn equilibrated_condition(&self) -> T {
        match equilibrate(self) {
            Some((scaled, _)) => {
                let (vals, _) = scaled.sym_eigen();
                let lo = vals[0];
                let hi = vals[vals.len() - 1];
                if lo <= T::zero() {
                    T::infinity()
                } else {
                    hi / lo
                }
            }
            None => T::infinity(),
        }
    }

    /// Solves `A x = b` for symmetric positive-definite `A`.
    ///
    /// The system is scaled to unit diagonal first; a condition number above
    /// [`max_condition`] on the scaled matrix is an error.
    pub fn solve_spd(&self, b: &[T]) -> Result<Vec<T>> {
        let (chol, d) = self.checked_cholesky()?;
        let rhs: Vec<T> = b.iter().zip(&d).map(|(&bi, &di)| bi / di).collect();
        let y = chol.cholesky_solve(&rhs);
        Ok(y.iter().zip(&d).map(|(&yi, &di)| yi / di).collect())
    }

    /// Inverse of a symmetric positive-definite matrix, with the same
    /// conditioning check as [`Matrix::solve_spd`].
    pub fn inverse_spd(&self) -> Result<Self> {
        let (chol, d) = self.checked_cholesky()?;
        let n = self.rows;
        let mut inv = Matrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one() / d[j];
            let col = chol.cholesky_solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i] / d[i];
            }
        }
        Ok(inv.symmetrized())
    }

    fn checked_cholesky(&self) -> Result<(Self, Vec<T>)> {
        if !self.is_square() {
            return Err(ArchError::domain("matrix is not square"));
        }
        if self.data.iter().any(|a| !a.is_finite()) {
            return Err(ArchError::singular("matrix has non-finite entries"));
        }
        let (scaled, d) =
            equilibrate(self).ok_or_else(|| ArchError::singular("matrix has a non-positive diagonal entry"))?;
        let (vals, _) = scaled.sym_eigen();
        let lo = vals[0];
        let hi = vals[vals.len() - 1];
        let cond = if lo <= T::zero() { T::infinity() } else { hi / lo };
        if cond > max_condition::<T>() {
            return Err(ArchError::singular(format!(
                "condition number {:e} exceeds {:e}",
                cond.to_f64_lossy(),
                max_condition::<T>().to_f64_lossy()
            )));
        }
        let chol = scaled.cholesky().ok_or_else(|| ArchError::singular("Cholesky factorization failed"))?;
        Ok((chol, d))
    }

    /// Lower Cholesky factor, or `None` when a pivot is not positive.
    pub fn cholesky(&self) -> Option<Self> {
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = self[(j, j)];
            for k in 0..j {
                diag = diag - l[(j, k)] * l[(j, k)];
            }
            if diag <= T::zero() || !diag.is_finite() {
                return None;
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(l)
    }

    /// Solves `L L^T x = b` given the lower factor `L = self`.
    fn cholesky_solve(&self, b: &[T]) -> Vec<T> {
        let n = self.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self[(i, k)] * y[k];
            }
            y[i] = s / self[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - self[(k, i)] * y[k];
            }
            y[i] = s / self[(i, i)];
        }
        y
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = (other.rows, other.cols);
        Self::from_fn(self.rows * r2, self.cols * c2, |i, j| self[(i / r2, j / c2)] * other[(i % r2, j % c2)])
    }

    /// Largest singular value by power iteration on `A^T A`.
    pub fn spectral_norm(&self) -> T {
        let at = self.transpose();
        spectral_norm_op(self.cols, |x| self.matvec(x), |y| at.matvec(y), T::lit(1e-10), 10_000)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

fn norm2<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// Scales a symmetric matrix to unit diagonal: returns `D^{-1} A D^{-1}` and `D`.
fn equilibrate<T: Scalar>(a: &Matrix<T>) -> Option<(Matrix<T>, Vec<T>)> {
    let d: Vec<T> = a.diagonal().into_iter().map(|x| x.sqrt()).collect();
    if d.iter().any(|&x| !(x > T::zero()) || !x.is_finite()) {
        return None;
    }
    let scaled = Matrix::from_fn(a.rows, a.cols, |i, j| {
        let v = (a[(i, j)] + a[(j, i)]) * T::lit(0.5);
        v / d[i] / d[j]
    });
    Some((scaled, d))
}

/// Largest singular value of a linear operator given by `apply` (`A x`) and
/// `apply_t` (`A^T y`), via power iteration on `A^T A`.
///
/// Stops when the relative change of the estimate falls below `tol`.
pub fn spectral_norm_op<T: Scalar>(
    dim: usize,
    apply: impl Fn(&[T]) -> Vec<T>,
    apply_t: impl Fn(&[T]) -> Vec<T>,
    tol: T,
    max_iter: usize,
) -> T {
    if dim == 0 {
        return T::zero();
    }
    // Deterministic, non-symmetric start so no eigenvector is missed by
    // accident of orthogonality.
    let mut x: Vec<T> = (0..dim)
        .map(|i| T::one() + T::lit(0.1) * T::from_usize_lossy(i % 7) + T::lit(1e-3) * T::from_usize_lossy(i))
        .collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v = *v / nx);
    let mut estimate = T::zero();
    for _ in 0..max_iter {
        let y = apply(&x);
        let z = apply_t(&y);
        let nz = norm2(&z);
        if nz == T::zero() || !nz.is_finite() {
            return if nz == T::zero() { T::zero() } else { nz };
        }
        let next = nz.sqrt();
        x = z.into_iter().map(|v| v / nz).collect();
        if (next - estimate).abs() <= tol * next {
            return next;
        }
        estimate = next;
    }
    estimate
}
