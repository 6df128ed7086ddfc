//! Two-stage M-estimation for Tobit models with an endogenous regressor.
//!
//! The endogenous column is regressed on an instrument and the exogenous
//! columns by least squares; the residual of that first stage is appended to
//! the design and a robust loss (absolute error, winsorized, log-cosh) is
//! minimized over the censored index in the second stage. The crate also
//! provides the sandwich covariance that accounts for the estimated first
//! stage, a simulation harness and a pairs bootstrap.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! below are the usual entry points.

pub mod bootstrap;
pub mod covariance;
pub mod data;
pub mod error;
pub mod estimator;
pub mod first_stage;
pub mod linalg;
pub mod loss;
pub mod monte_carlo;
pub mod optimizer;
pub mod scalar;

pub use bootstrap::{bootstrap_bmse, BootReport};
pub use covariance::{beta_covariance, covariance, estimate_blocks, wald_intervals, CovarianceReport};
pub use data::{AugmentedDesign, Dataset, InstrumentVector, Intercept, ParamVector};
pub use error::{Error, Result, Stage};
pub use estimator::{augment_design, fit, objective, score_norm, MEstimateFit};
pub use first_stage::{fit_first_stage, FirstStageFit};
pub use loss::{LossRegistry, LossSpec};
pub use monte_carlo::{generate, run_experiment, DgpConfig, ErrorFamily, SimOptions, SimReport};
pub use optimizer::{multi_start, nelder_mead, OptResult, SimplexConfig};
pub use scalar::Scalar;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type LossSpec64 = LossSpec<f64>;
pub type LossSpec32 = LossSpec<f32>;
pub type SimplexConfig64 = SimplexConfig<f64>;
pub type SimplexConfig32 = SimplexConfig<f32>;
pub type MEstimateFit64 = MEstimateFit<f64>;
pub type MEstimateFit32 = MEstimateFit<f32>;
pub type CovarianceReport64 = CovarianceReport<f64>;
pub type BootReport64 = BootReport<f64>;
pub type FirstStageFit64 = FirstStageFit<f64>;
