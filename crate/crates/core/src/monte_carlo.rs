//! Simulation design and replication harness.
//!
//! Each dataset follows
//!
//! ```text
//! z ~ U(0,1), x1 ~ N(0,1), e2 ~ N(0,1), x2 = alpha z + e2,
//! y = max(0, b0 + b1 x1 + b2 x2 + rho1 e2 + eta)
//! ```
//!
//! with `eta` drawn from one of four error families. Replication `k` uses its
//! own generator seeded from `(seed, k)`, so results do not depend on how the
//! replications are scheduled across threads.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::covariance::{self, intervals, standard_errors};
use crate::data::{censoring_fraction, Dataset, Intercept};
use crate::error::{Error, Result};
use crate::estimator::fit;
use crate::loss::LossSpec;
use crate::optimizer::SimplexConfig;
use crate::scalar::Scalar;

/// Names of the four reported coefficients, in estimate order.
pub const PARAM_NAMES: [&str; 4] = ["beta0", "beta1", "beta2", "rho1"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorFamily {
    NormalStd,
    LaplaceStd,
    StudentT3,
    HeteroNormal,
}

impl ErrorFamily {
    pub const ALL: [ErrorFamily; 4] =
        [ErrorFamily::NormalStd, ErrorFamily::LaplaceStd, ErrorFamily::StudentT3, ErrorFamily::HeteroNormal];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorFamily::NormalStd => "normal_std",
            ErrorFamily::LaplaceStd => "laplace_std",
            ErrorFamily::StudentT3 => "student_t3",
            ErrorFamily::HeteroNormal => "hetero_normal",
        }
    }
}

impl fmt::Display for ErrorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal_std" | "normal" => Ok(ErrorFamily::NormalStd),
            "laplace_std" | "laplace" => Ok(ErrorFamily::LaplaceStd),
            "student_t3" | "t3" => Ok(ErrorFamily::StudentT3),
            "hetero_normal" | "hetero" => Ok(ErrorFamily::HeteroNormal),
            _ => Err(Error::InvalidParameter(format!(
                "unknown error family `{s}` (expected normal_std, laplace_std, student_t3 or hetero_normal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    /// `(b0, b1, b2)`.
    pub beta_true: [f64; 3],
    pub rho1_true: f64,
    pub alpha_iv: f64,
    pub n: usize,
    pub error_family: ErrorFamily,
    pub seed: u64,
    /// Multiplies `eta`; 0 removes the idiosyncratic error entirely.
    pub noise_scale: f64,
}

impl DgpConfig {
    pub fn new(n: usize, error_family: ErrorFamily, seed: u64) -> Self {
        Self {
            beta_true: [1.0, 2.0, 3.0],
            rho1_true: 0.5,
            alpha_iv: 1.0,
            n,
            error_family,
            seed,
            noise_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidParameter(format!("n must be at least 10, got {}", self.n)));
        }
        let all = [self.beta_true[0], self.beta_true[1], self.beta_true[2], self.rho1_true, self.alpha_iv];
        if all.iter().any(|v| !v.is_finite()) || !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::InvalidParameter("DGP parameters must be finite, noise scale >= 0".into()));
        }
        Ok(())
    }

    /// `(b0, b1, b2, rho1)`.
    pub fn truth(&self) -> [f64; 4] {
        [self.beta_true[0], self.beta_true[1], self.beta_true[2], self.rho1_true]
    }
}

/// Laplace(0, 1) quantile function.
pub fn laplace_inverse_cdf(u: f64) -> f64 {
    let t = u - 0.5;
    -t.signum() * (1.0 - 2.0 * t.abs()).ln()
}

/// One draw of `eta`. For `HeteroNormal` this is the standard normal factor;
/// [`generate`] multiplies it by `|b1 x1 + b2 x2|`.
pub fn sample_error<R: Rng + ?Sized>(family: ErrorFamily, rng: &mut R) -> f64 {
    match family {
        ErrorFamily::NormalStd | ErrorFamily::HeteroNormal => StandardNormal.sample(rng),
        ErrorFamily::LaplaceStd => laplace_inverse_cdf(rng.random::<f64>()),
        ErrorFamily::StudentT3 => {
            let z: f64 = StandardNormal.sample(rng);
            let chi = ChiSquared::new(3.0).expect("valid degrees of freedom");
            let v: f64 = chi.sample(rng);
            z / (v / 3.0).sqrt()
        }
    }
}

/// SplitMix64 finalizer.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the `k`-th independent stream derived from `seed`.
pub fn child_seed(seed: u64, k: u64) -> u64 {
    mix(seed ^ mix(k.wrapping_add(1)))
}

/// Seed for one `(family, n)` cell of a simulation grid. Losses share it, so
/// every estimator sees the same datasets.
pub fn grid_seed(seed: u64, family: ErrorFamily, n: usize) -> u64 {
    child_seed(seed, ((family as u64) << 40) | n as u64)
}

/// Draws one dataset; deterministic in `cfg`.
pub fn generate<T: Scalar>(cfg: &DgpConfig) -> Result<Dataset<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;
    let [b0, b1, b2] = cfg.beta_true;
    let mut y = Vec::with_capacity(n);
    let mut x1s = Vec::with_capacity(n);
    let mut x2s = Vec::with_capacity(n);
    let mut zs = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = rng.random();
        let x1: f64 = StandardNormal.sample(&mut rng);
        let e2: f64 = StandardNormal.sample(&mut rng);
        let x2 = cfg.alpha_iv * z + e2;
        let mut eta = sample_error(cfg.error_family, &mut rng);
        if cfg.error_family == ErrorFamily::HeteroNormal {
            eta *= (b1 * x1 + b2 * x2).abs();
        }
        let latent = b0 + b1 * x1 + b2 * x2 + cfg.rho1_true * e2 + cfg.noise_scale * eta;
        y.push(T::lit(latent.max(0.0)));
        x1s.push(x1);
        x2s.push(T::lit(x2));
        zs.push(T::lit(z));
    }
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { T::one() } else { T::lit(x1s[i]) });
    Dataset::from_columns(DVector::from_vec(y), x, DVector::from_vec(x2s), DVector::from_vec(zs), T::zero(), Intercept::Require)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions<T: Scalar> {
    pub simplex: SimplexConfig<T>,
    /// When set, record Wald coverage at this level with and without the
    /// first-stage adjustment.
    pub coverage_level: Option<f64>,
}

impl<T: Scalar> Default for SimOptions<T> {
    fn default() -> Self {
        Self { simplex: SimplexConfig::default(), coverage_level: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub level: f64,
    pub adjusted: [f64; 4],
    pub unadjusted: [f64; 4],
}

/// Covariance checks accumulated over all successful replications.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CovarianceAudit {
    /// Fits whose `beta_cov` or adjustment failed the PSD check.
    pub psd_violations: usize,
    pub max_joint_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub loss: String,
    pub family: ErrorFamily,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub bias: [f64; 4],
    pub mse: [f64; 4],
    /// Mean censoring fraction over all generated datasets.
    pub censoring: f64,
    pub failures: usize,
    pub coverage: Option<Coverage>,
    pub audit: CovarianceAudit,
    /// Estimates of the successful replications, in replication order.
    pub estimates: Vec<[f64; 4]>,
}

struct Replication {
    censoring: f64,
    outcome: Option<([f64; 4], [bool; 4], [bool; 4], bool, f64)>,
}

fn replicate<T: Scalar>(cfg: &DgpConfig, loss: &LossSpec<T>, opts: &SimOptions<T>, k: usize) -> Result<Replication> {
    let mut c = cfg.clone();
    c.seed = child_seed(cfg.seed, k as u64);
    let ds = generate::<T>(&c)?;
    let censoring = censoring_fraction(&ds).as_f64();
    let Ok(f) = fit(&ds, loss, &opts.simplex, None) else {
        return Ok(Replication { censoring, outcome: None });
    };
    if !f.opt.converged {
        return Ok(Replication { censoring, outcome: None });
    }
    let Ok(cov) = covariance::covariance(&f, None) else {
        return Ok(Replication { censoring, outcome: None });
    };
    let beta = f.beta();
    let est = [beta[0].as_f64(), beta[1].as_f64(), beta[2].as_f64(), beta[3].as_f64()];
    let truth = cfg.truth();
    let mut adj = [false; 4];
    let mut unadj = [false; 4];
    if let Some(level) = opts.coverage_level {
        let a = intervals(&beta, &cov.se, level)?;
        let u = intervals(&beta, &standard_errors(&cov.unadjusted), level)?;
        for j in 0..4 {
            adj[j] = a[j].0.as_f64() <= truth[j] && truth[j] <= a[j].1.as_f64();
            unadj[j] = u[j].0.as_f64() <= truth[j] && truth[j] <= u[j].1.as_f64();
        }
    }
    let psd_ok = covariance::is_psd(&cov.beta_cov) && covariance::is_psd(&cov.adjustment);
    Ok(Replication { censoring, outcome: Some((est, adj, unadj, psd_ok, cov.joint_deviation.as_f64())) })
}

/// Runs `r` replications of the design with the given loss and aggregates
/// bias and MSE against the true coefficients.
///
/// A replication fails when fitting errors, the optimizer does not converge,
/// or the covariance matrix is singular; failures are excluded from the
/// averages and counted.
pub fn run_experiment<T: Scalar>(
    cfg: &DgpConfig,
    loss: &LossSpec<T>,
    r: usize,
    opts: &SimOptions<T>,
) -> Result<SimReport> {
    cfg.validate()?;
    opts.simplex.validate()?;
    if r == 0 {
        return Err(Error::InvalidParameter("replication count must be at least 1".into()));
    }
    if let Some(level) = opts.coverage_level {
        covariance::normal_quantile(level)?;
    }
    let reps: Vec<Replication> =
        (0..r).into_par_iter().map(|k| replicate(cfg, loss, opts, k)).collect::<Result<_>>()?;

    let truth = cfg.truth();
    let mut sum_dev = [0.0; 4];
    let mut sum_sq = [0.0; 4];
    let mut cov_adj = [0usize; 4];
    let mut cov_unadj = [0usize; 4];
    let mut audit = CovarianceAudit::default();
    let mut censoring = 0.0;
    let mut estimates = Vec::with_capacity(r);
    for rep in &reps {
        censoring += rep.censoring;
        let Some((est, adj, unadj, psd_ok, joint)) = rep.outcome else { continue };
        for j in 0..4 {
            let d = est[j] - truth[j];
            sum_dev[j] += d;
            sum_sq[j] += d * d;
            cov_adj[j] += adj[j] as usize;
            cov_unadj[j] += unadj[j] as usize;
        }
        if !psd_ok {
            audit.psd_violations += 1;
        }
        audit.max_joint_deviation = audit.max_joint_deviation.max(joint);
        estimates.push(est);
    }
    let ok = estimates.len();
    let failures = r - ok;
    if failures * 100 > r {
        log::warn!(
            "{} / {} replications failed ({}, {}, n = {})",
            failures,
            r,
            loss.label(),
            cfg.error_family,
            cfg.n
        );
    }
    let denom = ok.max(1) as f64;
    let nan_if_empty = |v: f64| if ok == 0 { f64::NAN } else { v };
    let coverage = opts.coverage_level.map(|level| Coverage {
        level,
        adjusted: cov_adj.map(|c| nan_if_empty(c as f64 / denom)),
        unadjusted: cov_unadj.map(|c| nan_if_empty(c as f64 / denom)),
    });
    Ok(SimReport {
        loss: loss.label(),
        family: cfg.error_family,
        n: cfg.n,
        r,
        seed: cfg.seed,
        bias: sum_dev.map(|s| nan_if_empty(s / denom)),
        mse: sum_sq.map(|s| nan_if_empty(s / denom)),
        censoring: censoring / r as f64,
        failures,
        coverage,
        audit,
        estimates,
    })
}
