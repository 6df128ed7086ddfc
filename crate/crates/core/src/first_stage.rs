//! First stage: least squares of the endogenous regressor on the instruments.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, InstrumentVector};
use crate::error::{Error, Result, Stage};
use crate::linalg::{self, MAX_CONDITION};
use crate::scalar::Scalar;

/// Least-squares fit of `w` on `z = (z1, x_exo)` plus its covariance ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStageFit<T: Scalar> {
    pub delta_hat: InstrumentVector<T>,
    pub residuals: DVector<T>,
    pub z: DMatrix<T>,
    pub sigma1_delta_hat: DMatrix<T>,
    pub d1_hat: DMatrix<T>,
    pub omega1_hat: DMatrix<T>,
}

/// Solves `min ||w - Z d||^2` through an SVD of `Z`.
///
/// Rejects designs whose Gram matrix `Z^T Z` has condition number above
/// `1e12`, i.e. `cond(Z) > 1e6`.
pub fn least_squares<T: Scalar>(z: &DMatrix<T>, w: &DVector<T>, stage: Stage) -> Result<(DVector<T>, DVector<T>)> {
    if z.nrows() != w.len() {
        return Err(Error::LengthMismatch { what: "w", expected: z.nrows(), found: w.len() });
    }
    let (rows, cols) = z.shape();
    if rows < cols {
        return Err(Error::RankDeficient { stage, rows, cols, condition: f64::INFINITY });
    }
    let svd = z.clone().svd(true, true);
    let sv = &svd.singular_values;
    let hi = sv.max();
    let lo = sv.min();
    let gram_condition = if lo > T::zero() { (hi / lo) * (hi / lo) } else { T::max_value().unwrap() };
    if !(hi > T::zero()) || !gram_condition.is_finite() || gram_condition.as_f64() > MAX_CONDITION {
        return Err(Error::RankDeficient { stage, rows, cols, condition: gram_condition.as_f64() });
    }
    let delta = svd
        .solve(w, T::zero())
        .map_err(|_| Error::RankDeficient { stage, rows, cols, condition: gram_condition.as_f64() })?;
    let residuals = w - z * &delta;
    Ok((delta, residuals))
}

/// `(1/n) sum z z^T` and `(1/n) sum e^2 z z^T`.
pub fn gram_blocks<T: Scalar>(z: &DMatrix<T>, residuals: &DVector<T>) -> (DMatrix<T>, DMatrix<T>) {
    let ones = DVector::from_element(z.nrows(), T::one());
    let sq = residuals.map(|e| e * e);
    (linalg::weighted_cross(z, z, &ones), linalg::weighted_cross(z, z, &sq))
}

/// `(Sigma1, D1, Omega1)` with `Omega1 = Sigma1^{-1} D1 Sigma1^{-T}`.
pub fn first_stage_cov<T: Scalar>(
    z: &DMatrix<T>,
    residuals: &DVector<T>,
) -> Result<(DMatrix<T>, DMatrix<T>, DMatrix<T>)> {
    let (sigma1, d1) = gram_blocks(z, residuals);
    let inv = linalg::checked_inverse(&sigma1, Stage::FirstStage, "sigma1_delta")?;
    let omega1 = linalg::symmetrize(&(&inv * &d1 * inv.transpose()));
    Ok((sigma1, d1, omega1))
}

/// Regresses `w` on `(z1, x_exo)` and assembles the first-stage covariance inputs.
pub fn fit_first_stage<T: Scalar>(ds: &Dataset<T>) -> Result<FirstStageFit<T>> {
    let z = ds.instrument_matrix();
    let (delta, residuals) = least_squares(&z, ds.w(), Stage::FirstStage)?;
    let (sigma1_delta_hat, d1_hat, omega1_hat) = first_stage_cov(&z, &residuals)?;
    Ok(FirstStageFit {
        delta_hat: InstrumentVector { delta: delta.iter().copied().collect() },
        residuals,
        z,
        sigma1_delta_hat,
        d1_hat,
        omega1_hat,
    })
}
