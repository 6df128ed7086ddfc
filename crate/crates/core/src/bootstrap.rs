//! Pairs bootstrap of the two-stage estimator.
//!
//! Every resample redraws whole rows `(y, x, w, z1)` and repeats both stages,
//! so first-stage estimation noise is part of the bootstrap spread.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{fit, fit_with_extra_starts};
use crate::loss::LossSpec;
use crate::monte_carlo::child_seed;
use crate::optimizer::SimplexConfig;
use crate::scalar::Scalar;

/// Draws per resample before it is counted as failed.
pub const MAX_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct BootReport<T: Scalar> {
    pub theta_hat: Vec<T>,
    /// Requested number of resamples.
    pub b: usize,
    /// `(1/B') sum_b (theta_b - theta_hat)^2` over the `B'` successful resamples.
    pub bmse: Vec<T>,
    /// One row per successful resample, in resample order.
    pub boot_estimates: DMatrix<T>,
    pub failures: usize,
    /// Resamples that needed more than one draw.
    pub redraws: usize,
}

/// Row indices of resample `b`, draw `attempt`.
pub fn resample_indices(n: usize, seed: u64, b: usize, attempt: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(child_seed(seed, b as u64), attempt as u64));
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Mean squared deviation of each column of `estimates` from `center`.
pub fn bmse<T: Scalar>(estimates: &DMatrix<T>, center: &[T]) -> Vec<T> {
    let b = T::from_count(estimates.nrows().max(1));
    (0..estimates.ncols())
        .map(|j| estimates.column(j).iter().fold(T::zero(), |a, &v| a + (v - center[j]) * (v - center[j])) / b)
        .collect()
}

/// Bootstrap with caller-supplied resamples: `draw(b, attempt)` returns the
/// row indices for resample `b`.
pub fn bootstrap_with<T, D>(
    ds: &Dataset<T>,
    loss: &LossSpec<T>,
    cfg: &SimplexConfig<T>,
    b: usize,
    draw: D,
) -> Result<BootReport<T>>
where
    T: Scalar,
    D: Fn(usize, usize) -> Vec<usize> + Sync,
{
    if b == 0 {
        return Err(Error::InvalidParameter("bootstrap needs at least one resample".into()));
    }
    let full = fit(ds, loss, cfg, None)?;
    let theta_hat = full.beta();
    let extra = [theta_hat.clone()];

    let runs: Vec<(Option<Vec<T>>, usize)> = (0..b)
        .into_par_iter()
        .map(|k| {
            for attempt in 0..MAX_ATTEMPTS {
                let rows = draw(k, attempt);
                let sample = ds.select_rows(&rows);
                if let Ok(f) = fit_with_extra_starts(&sample, loss, cfg, &extra) {
                    return (Some(f.beta()), attempt);
                }
            }
            (None, MAX_ATTEMPTS)
        })
        .collect();

    let k = theta_hat.len();
    let ok: Vec<&Vec<T>> = runs.iter().filter_map(|(e, _)| e.as_ref()).collect();
    let failures = b - ok.len();
    let redraws = runs.iter().filter(|(e, a)| e.is_some() && *a > 0).count();
    if failures > 0 {
        log::warn!("{failures} of {b} bootstrap resamples failed after {MAX_ATTEMPTS} draws");
    }
    let boot_estimates = DMatrix::from_fn(ok.len(), k, |i, j| ok[i][j]);
    Ok(BootReport { bmse: bmse(&boot_estimates, &theta_hat), theta_hat, b, boot_estimates, failures, redraws })
}

/// Pairs bootstrap with `b` resamples drawn from `seed`.
pub fn bootstrap_bmse<T: Scalar>(
    ds: &Dataset<T>,
    loss: &LossSpec<T>,
    b: usize,
    seed: u64,
    cfg: &SimplexConfig<T>,
) -> Result<BootReport<T>> {
    let n = ds.n();
    bootstrap_with(ds, loss, cfg, b, |k, attempt| resample_indices(n, seed, k, attempt))
}
