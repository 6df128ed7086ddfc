//! Second-stage M-estimation on the residual-augmented design.
//!
//! The objective is `Q_n(b) = (1/n) sum rho((y_i - c) - max(0, x_i^T b))`,
//! i.e. responses are measured relative to the threshold and the index is
//! censored at zero. With `c = 0` this is the usual censored M-objective.

use nalgebra::{DMatrix, DVector};

use crate::data::{AugmentedDesign, Dataset, ParamVector};
use crate::error::{Error, Result, Stage};
use crate::first_stage::{fit_first_stage, least_squares, FirstStageFit};
use crate::loss::LossSpec;
use crate::optimizer::{multi_start, OptResult, SimplexConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct MEstimateFit<T: Scalar> {
    pub beta_hat: ParamVector<T>,
    pub objective_value: T,
    pub first_stage: FirstStageFit<T>,
    pub design: AugmentedDesign<T>,
    /// `y - c`.
    pub response: DVector<T>,
    pub loss: LossSpec<T>,
    pub score_norm: T,
    pub opt: OptResult<T>,
    pub n: usize,
    pub p: usize,
}

impl<T: Scalar> MEstimateFit<T> {
    pub fn beta(&self) -> Vec<T> {
        self.beta_hat.to_vec()
    }

    /// `1(x_i^T b > 0)` and the residual `(y_i - c) - x_i^T b` for each row.
    pub fn active_residuals(&self) -> Vec<Option<T>> {
        active_residuals(&self.design, &self.response, &self.beta())
    }
}

/// Rows `(x_exo_i, w_i, e_i)` built from the first-stage residuals.
pub fn augment_design<T: Scalar>(ds: &Dataset<T>, fs: &FirstStageFit<T>) -> Result<AugmentedDesign<T>> {
    AugmentedDesign::new(ds.x_exo(), ds.w(), &fs.residuals)
}

fn active_residuals<T: Scalar>(x: &AugmentedDesign<T>, response: &DVector<T>, beta: &[T]) -> Vec<Option<T>> {
    (0..x.nrows())
        .map(|i| {
            let idx = x.index(i, beta);
            (idx > T::zero()).then(|| response[i] - idx)
        })
        .collect()
}

#[inline]
fn objective_unchecked<T: Scalar>(beta: &[T], x: &AugmentedDesign<T>, response: &[T], loss: &LossSpec<T>) -> T {
    let mut acc = T::zero();
    for (i, &r) in response.iter().enumerate() {
        acc += loss.rho(r - x.index(i, beta).max(T::zero()));
    }
    acc / T::from_count(response.len())
}

/// `Q_n(beta)` for responses `y` censored at `c`.
pub fn objective<T: Scalar>(
    beta: &ParamVector<T>,
    x: &AugmentedDesign<T>,
    y: &DVector<T>,
    c: T,
    loss: &LossSpec<T>,
) -> Result<T> {
    let b = beta.to_vec();
    if b.len() != x.ncols() {
        return Err(Error::LengthMismatch { what: "beta", expected: x.ncols(), found: b.len() });
    }
    if y.len() != x.nrows() {
        return Err(Error::LengthMismatch { what: "y", expected: x.nrows(), found: y.len() });
    }
    if x.nrows() == 0 {
        return Err(Error::Empty);
    }
    let mut acc = T::zero();
    for i in 0..x.nrows() {
        let idx = x.index(i, &b);
        if !idx.is_finite() {
            return Err(Error::NonFinitePredictor { row: i });
        }
        acc += loss.rho((y[i] - c) - idx.max(T::zero()));
    }
    Ok(acc / T::from_count(x.nrows()))
}

/// OLS of `y - c` on the full design, OLS on the uncensored rows, and zero.
///
/// A least-squares start is skipped when its design is rank deficient.
pub fn default_starts<T: Scalar>(x: &AugmentedDesign<T>, response: &DVector<T>) -> Vec<Vec<T>> {
    let k = x.ncols();
    let m = x.to_matrix();
    let mut starts = Vec::with_capacity(3);
    if let Ok((b, _)) = least_squares(&m, response, Stage::Estimator) {
        starts.push(b.iter().copied().collect());
    }
    let rows: Vec<usize> = (0..x.nrows()).filter(|&i| response[i] > T::zero()).collect();
    if rows.len() >= k {
        let sub: DMatrix<T> = m.select_rows(rows.iter());
        let ys: DVector<T> = response.select_rows(rows.iter());
        if let Ok((b, _)) = least_squares(&sub, &ys, Stage::Estimator) {
            starts.push(b.iter().copied().collect());
        }
    }
    starts.push(vec![T::zero(); k]);
    starts
}

/// Two-stage fit: first-stage OLS, design augmentation, then multi-start
/// Nelder–Mead on `Q_n`. `starts = None` uses [`default_starts`].
pub fn fit<T: Scalar>(
    ds: &Dataset<T>,
    loss: &LossSpec<T>,
    cfg: &SimplexConfig<T>,
    starts: Option<&[Vec<T>]>,
) -> Result<MEstimateFit<T>> {
    fit_impl(ds, loss, cfg, starts, &[])
}

/// [`fit`] with `extra` tried before the default starts.
pub fn fit_with_extra_starts<T: Scalar>(
    ds: &Dataset<T>,
    loss: &LossSpec<T>,
    cfg: &SimplexConfig<T>,
    extra: &[Vec<T>],
) -> Result<MEstimateFit<T>> {
    fit_impl(ds, loss, cfg, None, extra)
}

fn fit_impl<T: Scalar>(
    ds: &Dataset<T>,
    loss: &LossSpec<T>,
    cfg: &SimplexConfig<T>,
    starts: Option<&[Vec<T>]>,
    extra: &[Vec<T>],
) -> Result<MEstimateFit<T>> {
    let n = ds.n();
    let uncensored = n - ds.censored_count();
    if uncensored < 2 {
        return Err(Error::NotIdentified { uncensored, n });
    }
    let first_stage = fit_first_stage(ds)?;
    let design = augment_design(ds, &first_stage)?;
    let c = ds.threshold();
    let response = ds.y().map(|v| v - c);
    let k = design.ncols();

    let starts: Vec<Vec<T>> = match starts {
        Some(s) => s.to_vec(),
        None => extra.iter().cloned().chain(default_starts(&design, &response)).collect(),
    };
    if let Some(bad) = starts.iter().find(|s| s.len() != k) {
        return Err(Error::LengthMismatch { what: "start", expected: k, found: bad.len() });
    }
    let resp = response.as_slice();
    let opt = multi_start(|b: &[T]| objective_unchecked(b, &design, resp, loss), &starts, cfg)?;
    let beta_hat = ParamVector::from_slice(&opt.x_min)?;
    let objective_value = objective(&beta_hat, &design, ds.y(), c, loss)?;
    let score_norm = score(&design, &response, &opt.x_min, loss).norm();
    Ok(MEstimateFit {
        beta_hat,
        objective_value,
        first_stage,
        design,
        response,
        loss: loss.clone(),
        score_norm,
        opt,
        n,
        p: ds.p(),
    })
}

/// `-(1/n) sum 1(x_i^T b > 0) psi(r_i) x_i`.
pub fn score<T: Scalar>(x: &AugmentedDesign<T>, response: &DVector<T>, beta: &[T], loss: &LossSpec<T>) -> DVector<T> {
    let mut j = DVector::zeros(x.ncols());
    for (i, r) in active_residuals(x, response, beta).into_iter().enumerate() {
        if let Some(r) = r {
            let s = loss.psi(r);
            for (jj, &xv) in j.iter_mut().zip(x.row(i)) {
                *jj -= s * xv;
            }
        }
    }
    j / T::from_count(x.nrows())
}

/// Euclidean norm of the empirical score at the fitted coefficients.
pub fn score_norm<T: Scalar>(fit: &MEstimateFit<T>) -> T {
    score(&fit.design, &fit.response, &fit.beta(), &fit.loss).norm()
}
