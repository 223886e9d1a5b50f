use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the estimation pipeline can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {what} = {value} exceeds {limit}")]
    Range {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("precision error: {nodes} quadrature nodes is below the floor of {floor}")]
    Precision { nodes: usize, floor: usize },

    #[error("infeasible target: {0}")]
    Infeasible(String),

    #[error("circulant embedding failed: smallest eigenvalue {min_eigenvalue:e} at size {size}")]
    Embedding { min_eigenvalue: f64, size: usize },

    #[error("problem mismatch: expected {expected}, got {found}")]
    ProblemMismatch {
        expected: crate::Problem,
        found: crate::Problem,
    },

    #[error("insufficient coefficients: need {needed}, have {available}")]
    InsufficientCoefficients { needed: usize, available: usize },

    #[error("empty tau curve")]
    EmptyCurve,

    #[error("truncation error: series has {available} coefficients, {needed} required")]
    Truncation { needed: usize, available: usize },

    #[error("degenerate fit: {usable} usable points, at least 4 required")]
    DegenerateFit { usable: usize },

    #[error("degenerate gamma denominator: tau(M) = {tau_m:e}, tau(2M) = {tau_2m:e}, tau(4M) = {tau_4m:e}")]
    DegenerateDenominator { tau_m: f64, tau_2m: f64, tau_4m: f64 },

    #[error("u = {u} is below the threshold {threshold}")]
    BelowThreshold { u: f64, threshold: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
