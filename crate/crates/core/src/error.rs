use thiserror::Error;

use crate::theory::Regime;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid initial law: {0}")]
    InvalidInitial(String),

    #[error("conditional law is undefined before the first step (n = 0)")]
    EmptyHistory,

    #[error("no phase transition: the critical threshold is undefined for theta = 0")]
    NoTransition,

    #[error("operation requires the {expected} regime but parameters are {actual}")]
    RegimeMismatch { expected: &'static str, actual: Regime },

    #[error("degenerate spectrum: second eigenvalue equals 1 (theta = 1 and p = 1)")]
    DegenerateSpectrum,

    #[error("series diverges: 2*a*theta = {0} is not greater than 1")]
    DivergentSeries(f64),

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("instance too large: K^n = {0} exceeds the enumeration limit")]
    InstanceTooLarge(u128),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
