//! Observational data and parameter containers.
//!
//! All types here are immutable after construction; validation happens once,
//! in the constructors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How [`Dataset::from_columns`] treats the intercept column of `x_exo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Intercept {
    /// Column 0 must already be all ones.
    #[default]
    Require,
    /// Prepend a column of ones.
    Prepend,
}

/// Left-censored responses with exogenous, endogenous and instrument columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    y: DVector<T>,
    x_exo: DMatrix<T>,
    w: DVector<T>,
    z1: DVector<T>,
    threshold: T,
}

fn check_finite<T: Scalar>(column: &'static str, values: impl Iterator<Item = T>) -> Result<()> {
    for (row, v) in values.enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { column, row });
        }
    }
    Ok(())
}

impl<T: Scalar> Dataset<T> {
    /// Validates and assembles a dataset.
    ///
    /// `x_exo` is `n x p`; with [`Intercept::Prepend`] a column of ones is
    /// added in front and `p` grows by one.
    pub fn from_columns(
        y: DVector<T>,
        x_exo: DMatrix<T>,
        w: DVector<T>,
        z1: DVector<T>,
        threshold: T,
        intercept: Intercept,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        for (what, len) in [("x_exo", x_exo.nrows()), ("w", w.len()), ("z1", z1.len())] {
            if len != n {
                return Err(Error::LengthMismatch { what, expected: n, found: len });
            }
        }
        if !threshold.is_finite() {
            return Err(Error::InvalidParameter("censoring threshold must be finite".into()));
        }
        check_finite("y", y.iter().copied())?;
        check_finite("w", w.iter().copied())?;
        check_finite("z1", z1.iter().copied())?;
        for (row, r) in x_exo.row_iter().enumerate() {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { column: "x_exo", row });
            }
        }
        if let Some(row) = y.iter().position(|&v| v < threshold) {
            return Err(Error::BelowThreshold { row });
        }
        let x_exo = match intercept {
            Intercept::Prepend => x_exo.insert_column(0, T::one()),
            Intercept::Require => {
                if x_exo.ncols() == 0 {
                    return Err(Error::MissingIntercept { row: 0 });
                }
                if let Some(row) = x_exo.column(0).iter().position(|&v| v != T::one()) {
                    return Err(Error::MissingIntercept { row });
                }
                x_exo
            }
        };
        Ok(Self { y, x_exo, w, z1, threshold })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of exogenous columns, intercept included.
    pub fn p(&self) -> usize {
        self.x_exo.ncols()
    }

    pub fn y(&self) -> &DVector<T> {
        &self.y
    }

    pub fn x_exo(&self) -> &DMatrix<T> {
        &self.x_exo
    }

    pub fn w(&self) -> &DVector<T> {
        &self.w
    }

    pub fn z1(&self) -> &DVector<T> {
        &self.z1
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    /// Observations stored exactly at the threshold.
    pub fn censored_count(&self) -> usize {
        self.y.iter().filter(|&&v| v == self.threshold).count()
    }

    /// New dataset made of the given rows, in order (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            y: self.y.select_rows(rows.iter()),
            x_exo: self.x_exo.select_rows(rows.iter()),
            w: self.w.select_rows(rows.iter()),
            z1: self.z1.select_rows(rows.iter()),
            threshold: self.threshold,
        }
    }

    /// Instrument matrix `z_i = (z1_i, x_exo_i)`.
    pub fn instrument_matrix(&self) -> DMatrix<T> {
        let mut z = self.x_exo.clone().insert_column(0, T::zero());
        z.set_column(0, &self.z1);
        z
    }
}

/// Share of observations censored at the threshold (exact equality).
pub fn censoring_fraction<T: Scalar>(ds: &Dataset<T>) -> T {
    T::from_count(ds.censored_count()) / T::from_count(ds.n())
}

/// Second-stage coefficients `(alpha, gamma, rho1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T: Scalar> {
    pub alpha: Vec<T>,
    pub gamma: T,
    pub rho1: T,
}

impl<T: Scalar> ParamVector<T> {
    /// Splits a flat `(p + 2)` vector laid out as `(alpha..., gamma, rho1)`.
    pub fn from_slice(beta: &[T]) -> Result<Self> {
        if beta.len() < 3 {
            return Err(Error::LengthMismatch { what: "beta", expected: 3, found: beta.len() });
        }
        if let Some(i) = beta.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { column: "beta", row: i });
        }
        let p = beta.len() - 2;
        Ok(Self { alpha: beta[..p].to_vec(), gamma: beta[p], rho1: beta[p + 1] })
    }

    pub fn len(&self) -> usize {
        self.alpha.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut v = self.alpha.clone();
        v.push(self.gamma);
        v.push(self.rho1);
        v
    }
}

/// First-stage coefficients: the instrument's coefficient, then the exogenous ones.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentVector<T: Scalar> {
    pub delta: Vec<T>,
}

impl<T: Scalar> InstrumentVector<T> {
    pub fn instrument(&self) -> T {
        self.delta[0]
    }

    pub fn exogenous(&self) -> &[T] {
        &self.delta[1..]
    }
}

/// Second-stage design with rows `(x_exo_i, w_i, e_i)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDesign<T: Scalar> {
    rows: Vec<T>,
    n: usize,
    k: usize,
}

impl<T: Scalar> AugmentedDesign<T> {
    /// Builds the design from `x_exo` (n x p), the endogenous column and residuals.
    pub fn new(x_exo: &DMatrix<T>, w: &DVector<T>, residuals: &DVector<T>) -> Result<Self> {
        let n = x_exo.nrows();
        for (what, len) in [("w", w.len()), ("residuals", residuals.len())] {
            if len != n {
                return Err(Error::LengthMismatch { what, expected: n, found: len });
            }
        }
        let p = x_exo.ncols();
        let k = p + 2;
        let mut rows = Vec::with_capacity(n * k);
        for i in 0..n {
            rows.extend(x_exo.row(i).iter().copied());
            rows.push(w[i]);
            rows.push(residuals[i]);
        }
        Ok(Self { rows, n, k })
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    /// Column count, `p + 2`.
    pub fn ncols(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i * self.k..(i + 1) * self.k]
    }

    /// `x_i^T beta`.
    #[inline]
    pub fn index(&self, i: usize, beta: &[T]) -> T {
        self.row(i).iter().zip(beta).fold(T::zero(), |acc, (&x, &b)| acc + x * b)
    }

    pub fn to_matrix(&self) -> DMatrix<T> {
        DMatrix::from_row_slice(self.n, self.k, &self.rows)
    }
}
