use thiserror::Error;

/// Everything that can go wrong while building geometry, meshing or solving.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("segment {0} lies outside the closed domain")]
    DomainViolation(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("coordinate {coord} is not a grid line at this resolution")]
    Resolution { coord: f64 },
    #[error("unknown example id `{0}`")]
    UnknownExample(String),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("fields belong to different meshes")]
    MeshMismatch,
    #[error("exponent {0} must lie in (1, inf)")]
    InvalidExponent(f64),
    #[error("integrand is singular at zero gradient for p < 2 without regularization")]
    Singular,
    #[error("conjugate is only available for unregularized power densities")]
    UnsupportedConjugate,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("matrix is not positive definite (pivot at unknown {0})")]
    NotPositiveDefinite(usize),
    #[error("dual field violates its constraints: {0}")]
    InvalidDualField(String),
    #[error("flux is not conservative: path dependence {found:e} exceeds {allowed:e}")]
    FluxNotConservative { found: f64, allowed: f64 },
    #[error("domain not simply connected")]
    NotSimplyConnected,
    #[error("config error: {0}")]
    Config(String),
    #[error("mesh has no contact degrees of freedom at ({0}, {1})")]
    MissingContact(f64, f64),
}

impl Error {
    /// Whether the error comes from the numerics rather than from the input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::NotPositiveDefinite(_)
                | Error::FluxNotConservative { .. }
                | Error::Singular
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
