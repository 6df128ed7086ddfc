use thiserror::Error;

/// Which stage of the pipeline raised an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Data,
    Loss,
    FirstStage,
    Optimizer,
    Estimator,
    Covariance,
    MonteCarlo,
    Bootstrap,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Data => "core-data",
            Stage::Loss => "loss-functions",
            Stage::FirstStage => "first-stage-ols",
            Stage::Optimizer => "optimizer",
            Stage::Estimator => "m-estimator",
            Stage::Covariance => "covariance",
            Stage::MonteCarlo => "monte-carlo",
            Stage::Bootstrap => "bootstrap",
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("length mismatch: {what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {column} at row {row}")]
    NonFinite { column: &'static str, row: usize },

    #[error("response below threshold at row {row}")]
    BelowThreshold { row: usize },

    #[error("first exogenous column must be the intercept (all ones); row {row} differs")]
    MissingIntercept { row: usize },

    #[error("dataset is empty")]
    Empty,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("loss `{name}` violates {property}: {detail}")]
    LossInvariant {
        name: String,
        property: &'static str,
        detail: String,
    },

    #[error("unknown loss `{0}`")]
    UnknownLoss(String),

    #[error("{stage}: rank-deficient design ({rows}x{cols}, condition number {condition:.3e})", stage = .stage.as_str())]
    RankDeficient {
        stage: Stage,
        rows: usize,
        cols: usize,
        condition: f64,
    },

    #[error("{stage}: singular matrix `{matrix}` (smallest singular value {smallest_singular:.3e}, condition number {condition:.3e})", stage = .stage.as_str())]
    Singular {
        stage: Stage,
        matrix: &'static str,
        smallest_singular: f64,
        condition: f64,
    },

    #[error("objective is not finite at {point:?}")]
    NonFiniteObjective { point: Vec<f64> },

    #[error("non-finite linear predictor at row {row}")]
    NonFinitePredictor { row: usize },

    #[error("not identified: only {uncensored} uncensored observation(s) out of {n}")]
    NotIdentified { uncensored: usize, n: usize },

    #[error("{stage}: matrix `{matrix}` is not symmetric (max deviation {deviation:.3e})", stage = .stage.as_str())]
    Asymmetric {
        stage: Stage,
        matrix: &'static str,
        deviation: f64,
    },

    #[error("covariance: joint and direct beta covariance disagree (max relative deviation {deviation:.3e})")]
    JointMismatch { deviation: f64 },

    #[error("all {attempts} optimizer starts failed; last error: {last}")]
    AllStartsFailed { attempts: usize, last: Box<Error> },
}

impl Error {
    /// Pipeline stage the error originates from.
    pub fn stage(&self) -> Stage {
        match self {
            Error::LengthMismatch { .. }
            | Error::NonFinite { .. }
            | Error::BelowThreshold { .. }
            | Error::MissingIntercept { .. }
            | Error::Empty => Stage::Data,
            Error::InvalidParameter(_) => Stage::Data,
            Error::LossInvariant { .. } | Error::UnknownLoss(_) => Stage::Loss,
            Error::RankDeficient { stage, .. }
            | Error::Singular { stage, .. }
            | Error::Asymmetric { stage, .. } => *stage,
            Error::NonFiniteObjective { .. } | Error::AllStartsFailed { .. } => Stage::Optimizer,
            Error::NonFinitePredictor { .. } | Error::NotIdentified { .. } => Stage::Estimator,
            Error::JointMismatch { .. } => Stage::Covariance,
        }
    }

    /// True for failures of the numerics on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::Singular { .. }
                | Error::NonFiniteObjective { .. }
                | Error::NonFinitePredictor { .. }
                | Error::NotIdentified { .. }
                | Error::Asymmetric { .. }
                | Error::JointMismatch { .. }
                | Error::AllStartsFailed { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
