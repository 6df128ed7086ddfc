//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Stage};
use crate::scalar::Scalar;

/// Largest condition number accepted before a matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Smallest and largest singular values and their ratio.
pub fn singular_range<T: Scalar>(m: &DMatrix<T>) -> (T, T, T) {
    let sv = m.clone().svd(false, false).singular_values;
    let mut lo = T::max_value().unwrap();
    let mut hi = T::zero();
    for &s in sv.iter() {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    let cond = if lo > T::zero() { hi / lo } else { T::max_value().unwrap() };
    (lo, hi, cond)
}

/// Inverts a square matrix, refusing when it is numerically singular.
pub fn checked_inverse<T: Scalar>(m: &DMatrix<T>, stage: Stage, matrix: &'static str) -> Result<DMatrix<T>> {
    let (lo, hi, cond) = singular_range(m);
    if !(hi > T::zero()) || cond.as_f64() > MAX_CONDITION || !cond.is_finite() {
        return Err(Error::Singular {
            stage,
            matrix,
            smallest_singular: lo.as_f64(),
            condition: cond.as_f64(),
        });
    }
    m.clone().lu().try_inverse().ok_or(Error::Singular {
        stage,
        matrix,
        smallest_singular: lo.as_f64(),
        condition: cond.as_f64(),
    })
}

/// Largest |a_ij - a_ji| relative to the largest entry magnitude.
pub fn relative_asymmetry<T: Scalar>(m: &DMatrix<T>) -> T {
    let scale = m.amax().max(T::default_epsilon());
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue<T: Scalar>(m: &DMatrix<T>) -> T {
    let eig = symmetrize(m).symmetric_eigen();
    eig.eigenvalues.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b))
}

/// PSD within `-tol * max(trace, tiny)`.
pub fn is_psd<T: Scalar>(m: &DMatrix<T>, tol: T) -> bool {
    let scale = m.trace().abs().max(T::default_epsilon());
    min_eigenvalue(m) >= -tol * scale
}

/// Sum of `weight_i * a_i b_i^T` over rows, divided by `n`.
pub fn weighted_cross<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, weights: &DVector<T>) -> DMatrix<T> {
    let n = a.nrows();
    let mut scaled = a.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= weights[i];
    }
    scaled.transpose() * b / T::from_count(n)
}
