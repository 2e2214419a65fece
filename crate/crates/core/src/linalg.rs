//! Thin deterministic wrappers around the dense linear-algebra backend.
//!
//! The eigen and SVD routines come from nalgebra; these wrappers pin the
//! conventions the rest of the crate relies on: descending eigenvalue order,
//! a fixed sign for each eigenvector, and pseudo-inverse least squares with a
//! relative singular-value cutoff.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
///
/// Eigenvectors come back orthonormal, one per column, in the sorted order.
/// Ties keep the backend's original ordering, which is itself deterministic,
/// so repeated calls on identical input are bitwise identical.
pub fn symmetric_eigen_desc<T: Real>(a: DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::invalid_argument(format!(
            "symmetric eigen needs a square nonempty matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        if !eig.eigenvalues[src].finite() {
            return Err(Error::numeric("eigensolver produced a non-finite eigenvalue"));
        }
        values[dst] = eig.eigenvalues[src];
        vectors.column_mut(dst).copy_from(&eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Flips each column so its largest-magnitude entry is positive.
///
/// On magnitude ties the earliest row wins, which keeps the convention
/// deterministic for symmetric vectors.
pub fn fix_column_signs<T: Real>(m: &mut DMatrix<T>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        let mut best_mag = T::zero();
        for (i, v) in col.iter().enumerate() {
            let mag = v.abs();
            if mag > best_mag {
                best_mag = mag;
                best = i;
            }
        }
        if col[best] < T::zero() {
            col.neg_mut();
        }
    }
}

/// Minimum-norm least-squares solution of `a x = b` via SVD.
///
/// Singular values below `cutoff_rel * sigma_max` are treated as zero. Also
/// returns `(sigma_max, sigma_min)` over the full `min(m, n)` spectrum of `a`
/// so callers can report conditioning; `sigma_min` is zero when the spectrum
/// is rank deficient.
pub fn svd_least_squares<T: Real>(
    a: &DMatrix<T>,
    b: &DVector<T>,
    cutoff_rel: T,
) -> Result<(DVector<T>, T, T)> {
    if a.nrows() != b.len() {
        return Err(Error::invalid_argument(format!(
            "least squares shape mismatch: matrix has {} rows, rhs has {}",
            a.nrows(),
            b.len()
        )));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd requested u");
    let vt = svd.v_t.as_ref().expect("svd requested v_t");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().fold(T::zero(), |m, &s| if s > m { s } else { m });
    let mut sigma_min = sigma_max;
    for &s in sigma.iter() {
        if s < sigma_min {
            sigma_min = s;
        }
    }
    // q < min(m, n) singular values means the backend truncated; treat the
    // missing ones as exact zeros.
    if sigma.len() < a.nrows().min(a.ncols()) {
        sigma_min = T::zero();
    }
    let threshold = cutoff_rel * sigma_max;
    let mut x = DVector::zeros(a.ncols());
    for (j, &s) in sigma.iter().enumerate() {
        if s > threshold && s > T::zero() {
            let coeff = u.column(j).dot(b) / s;
            x.axpy(coeff, &vt.row(j).transpose(), T::one());
        }
    }
    Ok((x, sigma_max, sigma_min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigen_sorted_and_orthonormal() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let (vals, vecs) = symmetric_eigen_desc(a.clone()).unwrap();
        assert_relative_eq!(vals[0], 5.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(vals[2], 1.0, epsilon = 1e-12);
        let gram = vecs.transpose() * &vecs;
        assert_relative_eq!(gram, DMatrix::identity(3, 3), epsilon = 1e-12);
        for j in 0..3 {
            let residual = &a * vecs.column(j) - vecs.column(j) * vals[j];
            assert!(residual.norm() < 1e-12);
        }
    }

    #[test]
    fn sign_fix_makes_peak_positive() {
        let mut m = DMatrix::from_row_slice(3, 2, &[0.1, -0.9, -0.8, 0.3, 0.2, 0.1]);
        fix_column_signs(&mut m);
        assert!(m[(1, 0)] > 0.0);
        assert!(m[(0, 1)] > 0.0);
    }

    #[test]
    fn least_squares_exact_system() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (x, smax, smin) = svd_least_squares(&a, &b, 1e-12).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-12);
        assert!(smax >= smin && smin > 0.0);
    }

    #[test]
    fn least_squares_rank_deficient_minimum_norm() {
        // Two identical columns: infinitely many solutions, expect the
        // minimum-norm split (0.5, 0.5).
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let (x, _, smin) = svd_least_squares(&a, &b, 1e-12).unwrap();
        assert_relative_eq!(x[0], 0.5, epsilon = 1e-10);
        assert_relative_eq!(x[1], 0.5, epsilon = 1e-10);
        assert!(smin < 1e-12);
    }
}
