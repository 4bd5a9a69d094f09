use thiserror::Error;

/// Coarse classification used by front ends to pick exit codes and HTTP
/// statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Io,
    Validation,
    Infeasible,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("budget mismatch: sum(x*y) = {actual}, expected {expected}")]
    BudgetMismatch { actual: f64, expected: f64 },

    #[error("infeasible budget: capacity {capacity} < budget {budget}")]
    InfeasibleBudget { capacity: f64, budget: f64 },

    #[error("degenerate ROI denominator in scenario {scenario}")]
    DegenerateDenominator { scenario: usize },

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("zero spread: samples have zero standard deviation")]
    ZeroSpread,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("objective evaluation is not finite")]
    NonFiniteEvaluation,

    #[error("starting portfolio is infeasible: {0}")]
    InfeasibleStart(String),

    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    #[error("no bracket: target {target} outside attained objective range [{lo}, {hi}]")]
    NoBracket { target: f64, lo: f64, hi: f64 },

    #[error("iso-objective line is empty: no column brackets {level}")]
    EmptyIsoLine { level: f64 },

    #[error("flat landscape: |dF/dB| = {0} too small")]
    FlatLandscape(f64),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) => ErrorClass::Io,
            Error::Parse(_) | Error::Dimension(_) | Error::Invalid(_) | Error::GridMismatch(_) => {
                ErrorClass::Validation
            }
            Error::BudgetMismatch { .. }
            | Error::InfeasibleBudget { .. }
            | Error::InfeasibleStart(_)
            | Error::Infeasible(_) => ErrorClass::Infeasible,
            Error::DegenerateDenominator { .. }
            | Error::DegenerateSamples(_)
            | Error::ZeroSpread
            | Error::NonFiniteEvaluation
            | Error::NoBracket { .. }
            | Error::EmptyIsoLine { .. }
            | Error::FlatLandscape(_) => ErrorClass::Numerical,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
