use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A request would exceed a fixed resource guard.
    #[error("resource limit: {0}")]
    Resource(String),
    /// Incompatible or invalid configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Degenerate geometry encountered at an evaluation point.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Patch too curved to flatten.
    #[error("flattening error: {0}")]
    Flattening(String),
    /// Factorization failed or produced a non-finite solution.
    #[error("singular system: {0}")]
    Singular(String),
    /// An iterative method hit its iteration cap.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// Vector or matrix sizes do not match.
    #[error("dimension mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the user's configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Resource(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
