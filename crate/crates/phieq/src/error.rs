use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("affine map is singular or badly conditioned")]
    SingularMap,
    #[error("shape matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("degenerate cut: w^T Q w = {0:e}")]
    DegenerateCut(f64),
    #[error("iteration cap of {0} cuts exceeded")]
    IterationCapExceeded(usize),
    #[error("certificate program infeasible: best value {value:e} below -{eps:e}")]
    CertificateInfeasible { value: f64, eps: f64 },
    #[error("map is not an endomorphism: x = {x:?} maps to {image:?}")]
    NotEndomorphism { x: Vec<f64>, image: Vec<f64> },
    #[error("bad bounds: inner radius {r} must be below outer radius {big_r}")]
    BadBounds { r: f64, big_r: f64 },
    #[error("identity map is not representable with these features")]
    IdentityUnrepresentable,
    #[error("projection sweep exhausted at radius {0}")]
    SweepExhausted(f64),
    #[error("verification failed: gap {gap:e} exceeds {limit:e}")]
    VerificationFailed { gap: f64, limit: f64 },
    #[error("verification mode unavailable: {0}")]
    ModeUnavailable(String),
    #[error("strategy is not a member of its body (player {0})")]
    NotMember(usize),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
}

impl Error {
    /// Stable variant name for structured reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NumericalBreakdown(_) => "NumericalBreakdown",
            Error::InvalidInput(_) => "InvalidInput",
            Error::SingularMap => "SingularMap",
            Error::NotPositiveDefinite => "NotPositiveDefinite",
            Error::DegenerateCut(_) => "DegenerateCut",
            Error::IterationCapExceeded(_) => "IterationCapExceeded",
            Error::CertificateInfeasible { .. } => "CertificateInfeasible",
            Error::NotEndomorphism { .. } => "NotEndomorphism",
            Error::BadBounds { .. } => "BadBounds",
            Error::IdentityUnrepresentable => "IdentityUnrepresentable",
            Error::SweepExhausted(_) => "SweepExhausted",
            Error::VerificationFailed { .. } => "VerificationFailed",
            Error::ModeUnavailable(_) => "ModeUnavailable",
            Error::NotMember(_) => "NotMember",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::Io(_) => "IoError",
            Error::ReplayMismatch(_) => "ReplayMismatch",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
