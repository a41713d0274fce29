use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symplectic (max deviation of S Omega S^T from Omega is {deviation:e})")]
    NotSymplectic { deviation: f64 },

    #[error("matrix is not symmetric (max relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("unknown kind `{0}`")]
    UnknownKind(String),

    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("covariance matrix is unphysical: symplectic eigenvalue nu[{index}] = {value} < 1")]
    NotPhysical { index: usize, value: f64 },

    #[error(
        "singular conditioning matrix (min singular value {min_singular:e}, condition number {condition:e}); increase the approximation squeezing"
    )]
    SingularConditioning { min_singular: f64, condition: f64 },

    #[error("invalid separability witness: {0}")]
    NotPhysicalWitness(String),

    #[error("measured quadrature is degenerate (variance {variance:e})")]
    DegenerateQuadrature { variance: f64 },

    #[error("numerical oracle supports at most {max} modes, got {found}")]
    TooManyModes { max: usize, found: usize },

    #[error("invalid bipartite split: {0}")]
    InvalidSplit(String),

    #[error("mode selection must not be empty")]
    EmptyKeepSet,

    #[error("invalid mode selection: {0}")]
    InvalidModes(String),

    #[error("state is not pure (symplectic eigenvalue {value} differs from 1)")]
    NotPure { value: f64 },

    #[error("expected a three-mode state, got {0} modes")]
    NotThreeMode(usize),

    #[error("malformed document: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
