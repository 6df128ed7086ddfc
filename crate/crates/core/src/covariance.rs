//! Sandwich covariance of the second-stage coefficients, including the
//! adjustment for the estimated first-stage residual.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result, Stage};
use crate::estimator::MEstimateFit;
use crate::linalg::{self, checked_inverse, relative_asymmetry, symmetrize};
use crate::loss::smoothed_psi_prime;
use crate::scalar::Scalar;

/// Symmetry tolerance (relative to the largest entry) for covariance outputs.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Allowed relative gap between the joint matrix's beta block and `beta_cov`.
pub const JOINT_TOL: f64 = 1e-8;

/// The three second-stage sums, with the bandwidth used for `psi'` when the
/// loss is not smooth.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks<T: Scalar> {
    pub sigma2_beta: DMatrix<T>,
    pub sigma2_delta: DMatrix<T>,
    pub d2: DMatrix<T>,
    pub bandwidth: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport<T: Scalar> {
    pub beta_hat: Vec<T>,
    pub sigma2_beta_hat: DMatrix<T>,
    pub sigma2_delta_hat: DMatrix<T>,
    pub d2_hat: DMatrix<T>,
    pub omega1_hat: DMatrix<T>,
    pub beta_cov: DMatrix<T>,
    /// The part of `beta_cov` due to first-stage estimation.
    pub adjustment: DMatrix<T>,
    /// `beta_cov - adjustment`, the covariance that treats the residual as known.
    pub unadjusted: DMatrix<T>,
    pub se: DVector<T>,
    pub bandwidth_h: Option<T>,
    /// Joint covariance of `(beta, delta)`, `(2p+3)^2`.
    pub joint_cov: DMatrix<T>,
    /// Largest relative gap between `joint_cov`'s beta block and `beta_cov`.
    pub joint_deviation: T,
}

/// `1.06 * sd(r) * n^(-1/5)` over the active residuals, floored at `sqrt(eps)`.
pub fn default_bandwidth<T: Scalar>(active: &[T], n: usize) -> T {
    let floor = T::default_epsilon().sqrt();
    let m = active.len();
    if m < 2 {
        return floor;
    }
    let mean = active.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(m);
    let var = active.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean)) / T::from_count(m - 1);
    let h = T::lit(1.06) * var.sqrt() * T::from_count(n).powf(T::lit(-0.2));
    if h > floor { h } else { floor }
}

/// Empirical `Sigma2_beta`, `Sigma2_delta` and `D2` at the fitted coefficients.
///
/// Only rows with `x_i^T b > 0` contribute. For losses without a classical
/// `psi'` the central difference quotient with bandwidth `h` (default
/// [`default_bandwidth`]) is used.
pub fn estimate_blocks<T: Scalar>(fit: &MEstimateFit<T>, h: Option<T>) -> Result<Blocks<T>> {
    let x = &fit.design;
    let z = &fit.first_stage.z;
    let n = x.nrows();
    let k = x.ncols();
    let q = z.ncols();
    let rho1 = fit.beta_hat.rho1;
    let active = fit.active_residuals();

    let bandwidth = if fit.loss.is_smooth() {
        None
    } else {
        let r: Vec<T> = active.iter().flatten().copied().collect();
        Some(match h {
            Some(h) => h,
            None => default_bandwidth(&r, n),
        })
    };
    let curvature: Box<dyn Fn(T) -> T + '_> = match bandwidth {
        None => Box::new(|r| fit.loss.psi_prime(r).unwrap_or_else(|| fit.loss.curvature(r, T::one()))),
        Some(h) => Box::new(smoothed_psi_prime(&fit.loss, h)?),
    };

    let mut s_beta = DMatrix::zeros(k, k);
    let mut s_delta = DMatrix::zeros(k, q);
    let mut d2 = DMatrix::zeros(k, k);
    for (i, r) in active.iter().enumerate() {
        let Some(r) = *r else { continue };
        let row = x.row(i);
        let c = curvature(r);
        let s = fit.loss.psi(r);
        let s2 = s * s;
        for a in 0..k {
            let xa = row[a];
            for b in 0..k {
                s_beta[(a, b)] += c * xa * row[b];
                d2[(a, b)] += s2 * xa * row[b];
            }
            for b in 0..q {
                s_delta[(a, b)] += c * rho1 * xa * z[(i, b)];
            }
        }
    }
    let inv_n = T::one() / T::from_count(n);
    Ok(Blocks { sigma2_beta: s_beta * inv_n, sigma2_delta: s_delta * inv_n, d2: d2 * inv_n, bandwidth })
}

fn check_symmetric<T: Scalar>(m: &DMatrix<T>, matrix: &'static str) -> Result<DMatrix<T>> {
    let dev = relative_asymmetry(m);
    if dev.as_f64() > SYMMETRY_TOL {
        return Err(Error::Asymmetric { stage: Stage::Covariance, matrix, deviation: dev.as_f64() });
    }
    Ok(symmetrize(m))
}

/// Assembles `beta_cov = S^{-1} (D2 + Sd Omega1 Sd^T) S^{-T} / n` and the
/// joint `(beta, delta)` covariance, and cross-checks the two.
pub fn beta_covariance<T: Scalar>(
    fit: &MEstimateFit<T>,
    blocks: &Blocks<T>,
    omega1_hat: &DMatrix<T>,
) -> Result<CovarianceReport<T>> {
    let n = T::from_count(fit.n);
    let s_inv = checked_inverse(&blocks.sigma2_beta, Stage::Covariance, "sigma2_beta")?;
    let sd = &blocks.sigma2_delta;
    let meat_adj = sd * omega1_hat * sd.transpose();
    let unadjusted = check_symmetric(&(&s_inv * &blocks.d2 * s_inv.transpose() / n), "unadjusted")?;
    let adjustment = check_symmetric(&(&s_inv * &meat_adj * s_inv.transpose() / n), "adjustment")?;
    let beta_cov = check_symmetric(&(&s_inv * (&blocks.d2 + &meat_adj) * s_inv.transpose() / n), "beta_cov")?;

    let (k, q) = sd.shape();
    let mut sigma = DMatrix::zeros(k + q, k + q);
    sigma.view_mut((0, 0), (k, k)).copy_from(&blocks.sigma2_beta);
    sigma.view_mut((0, k), (k, q)).copy_from(sd);
    sigma.view_mut((k, k), (q, q)).copy_from(&fit.first_stage.sigma1_delta_hat);
    let mut d = DMatrix::zeros(k + q, k + q);
    d.view_mut((0, 0), (k, k)).copy_from(&blocks.d2);
    d.view_mut((k, k), (q, q)).copy_from(&fit.first_stage.d1_hat);
    let sigma_inv = checked_inverse(&sigma, Stage::Covariance, "joint sigma")?;
    let joint_cov = check_symmetric(&(&sigma_inv * d * sigma_inv.transpose() / n), "joint")?;

    let block = joint_cov.view((0, 0), (k, k));
    let scale = beta_cov.amax().max(T::default_epsilon());
    let joint_deviation = (block - &beta_cov).amax() / scale;
    if joint_deviation.as_f64() > JOINT_TOL || !joint_deviation.is_finite() {
        return Err(Error::JointMismatch { deviation: joint_deviation.as_f64() });
    }

    let se = beta_cov.diagonal().map(|v| v.max(T::zero()).sqrt());
    Ok(CovarianceReport {
        beta_hat: fit.beta(),
        sigma2_beta_hat: blocks.sigma2_beta.clone(),
        sigma2_delta_hat: blocks.sigma2_delta.clone(),
        d2_hat: blocks.d2.clone(),
        omega1_hat: omega1_hat.clone(),
        beta_cov,
        adjustment,
        unadjusted,
        se,
        bandwidth_h: blocks.bandwidth,
        joint_cov,
        joint_deviation,
    })
}

/// [`estimate_blocks`] followed by [`beta_covariance`] with the fit's own `Omega1`.
pub fn covariance<T: Scalar>(fit: &MEstimateFit<T>, h: Option<T>) -> Result<CovarianceReport<T>> {
    let blocks = estimate_blocks(fit, h)?;
    beta_covariance(fit, &blocks, &fit.first_stage.omega1_hat)
}

/// Standard normal quantile `Phi^{-1}((1 + level) / 2)`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let std = Normal::standard();
    Ok(std.inverse_cdf(0.5 + level / 2.0))
}

/// `beta_j -/+ q * se_j` for every coefficient.
pub fn wald_intervals<T: Scalar>(report: &CovarianceReport<T>, level: f64) -> Result<Vec<(T, T)>> {
    intervals(&report.beta_hat, &report.se, level)
}

/// Same as [`wald_intervals`] from explicit estimates and standard errors.
pub fn intervals<T: Scalar>(beta: &[T], se: &DVector<T>, level: f64) -> Result<Vec<(T, T)>> {
    let q = T::lit(normal_quantile(level)?);
    Ok(beta.iter().zip(se.iter()).map(|(&b, &s)| (b - q * s, b + q * s)).collect())
}

/// Standard errors from the diagonal of a covariance matrix.
pub fn standard_errors<T: Scalar>(cov: &DMatrix<T>) -> DVector<T> {
    cov.diagonal().map(|v| v.max(T::zero()).sqrt())
}

/// PSD check used by the covariance invariants: `lambda_min >= -1e-8 * trace`.
pub fn is_psd<T: Scalar>(m: &DMatrix<T>) -> bool {
    linalg::is_psd(m, T::lit(1e-8))
}
