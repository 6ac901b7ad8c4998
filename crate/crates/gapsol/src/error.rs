use thiserror::Error;

/// Errors raised by the gapsol engine.
///
/// Failed proof inequalities are *not* errors: they are reported through the
/// verdict fields of the stage certificates.
#[derive(Debug, Error)]
pub enum Error {
    #[error("division by an interval containing zero: {0}")]
    DivisionByZero(String),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("malformed decimal literal `{0}`")]
    MalformedDecimal(String),
    #[error("malformed hex-float `{0}`")]
    MalformedHex(String),
    #[error("sequence weights differ ({0} vs {1})")]
    WeightMismatch(f64, f64),
    #[error("invalid weight {0}: weights must be finite and at least 1")]
    InvalidWeight(f64),
    #[error("incompatible spaces: {0}")]
    Incompatible(String),
    #[error("no stable Floquet exponent: {0}")]
    NoStableExponent(String),
    #[error("matrix is singular to working precision: {0}")]
    Singular(String),
    #[error("ODE integration failed: {0}")]
    Integration(String),
    #[error("Newton iteration diverged: {0}")]
    Divergence(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("certificate mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
