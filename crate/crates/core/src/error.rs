use std::fmt;

/// A broken model invariant, naming the offending field or principal minor.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelViolation {
    pub field: &'static str,
    pub message: String,
}

impl ModelViolation {
    pub(crate) fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

impl fmt::Display for ModelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(ModelViolation),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("SingularObservation: observed covariance block is numerically singular")]
    SingularObservation,
    #[error("DegenerateDenominator: objective denominator {0:e} is not positive")]
    DegenerateDenominator(f64),
    #[error("ZeroRate: rate must be positive, got {0}")]
    ZeroRate(f64),
    #[error("InvalidDistribution: {0}")]
    InvalidDistribution(String),
    #[error("NoRoot: {0}")]
    NoRoot(String),
    #[error("InfeasibleInterval: {0}")]
    InfeasibleInterval(String),
    #[error("NonCanonicalizable: {0}")]
    NonCanonicalizable(String),
    #[error("CrossTermPresent: objective contains a U*X_hat product; linear strategies are not claimed")]
    CrossTermPresent,
    #[error("Unbounded: power weight k1 = {0} must be positive")]
    Unbounded(f64),
}

impl Error {
    /// True for input/validation failures, false for numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel(_)
                | Error::InvalidInput(_)
                | Error::InvalidDistribution(_)
                | Error::ZeroRate(_)
                | Error::NonCanonicalizable(_)
                | Error::CrossTermPresent
                | Error::Unbounded(_)
        )
    }
}

impl From<ModelViolation> for Error {
    fn from(v: ModelViolation) -> Self {
        Error::InvalidModel(v)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
