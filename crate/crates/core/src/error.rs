use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degree {requested} out of range (available {available})")]
    OutOfRange { requested: usize, available: usize },

    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("constant C = {c} too small: {reason}")]
    CTooSmall { c: f64, reason: String },

    #[error("k_max = {requested} exceeds the desk-scale cap; largest feasible k is {largest_feasible}")]
    KMaxTooLarge {
        requested: usize,
        largest_feasible: usize,
    },

    #[error("infeasible parameters: {reason} (attained log kappa = {log_kappa:.6})")]
    Infeasible { reason: String, log_kappa: f64 },

    #[error("stage {stage} failed: {reason}")]
    StageFailure { stage: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::OutOfRange { .. }
                | Error::KMaxTooLarge { .. }
                | Error::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
