use thiserror::Error;

/// Everything that can go wrong while building operators, states or exponents.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not Hermitian (deviation {deviation:e} exceeds {tolerance:e})")]
    NonHermitianInput { deviation: f64, tolerance: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("trace is {trace}, expected 1")]
    NotNormalized { trace: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("dimension {requested} exceeds the size cap {cap}")]
    SizeOverflow { requested: usize, cap: usize },

    #[error("eigensolver failed: {0}")]
    NumericalFailure(String),

    #[error("explicit family has {available} restrictions, requested n = {requested}")]
    IndexOutOfRange { requested: usize, available: usize },

    #[error("transition ({x}, {y}) has positive probability but no site state")]
    MissingSiteState { x: usize, y: usize },

    #[error("prior {0} is outside (0, 1)")]
    InvalidPrior(f64),

    #[error("exponent s = {0} is outside [0, 1]")]
    InvalidExponent(f64),

    #[error("supports are orthogonal; the testing problem is trivial")]
    OrthogonalSupports,

    #[error("support condition violated: {0}")]
    SupportViolation(String),

    #[error("log-ratio lattice exceeded {cap} atoms")]
    RatioLatticeOverflow { cap: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
