use thiserror::Error;

/// Errors raised across the crate.
///
/// Several variants carry numerical meaning for the tracker: a
/// `SingularMatrix` while factoring the continuation mass matrix signals
/// proximity to a defective eigenvalue, and `NoConvergence` from an
/// equilibrium solve signals loss of the operating point.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular matrix: pivot {pivot:.3e} at step {step} is below the floor")]
    SingularMatrix { step: usize, pivot: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("eigenvalue jumped by {0:.3e} and no corrector is available to confirm it")]
    UnverifiedJump(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular Schur complement (g_y - R T^-1 f_y): an eigenvalue is at infinity")]
    SingularSchurComplement,

    #[error("singular left-hand matrix T: the state matrix cannot be formed")]
    SingularStateMatrix,

    #[error("degenerate eigenvector: phi^T phi = 0, the bilinear normalization is unusable")]
    DegenerateVector,

    #[error("no reinitialization candidate: best MAC {best_mac:.3} is below {threshold}")]
    NoCandidate { best_mac: f64, threshold: f64 },

    #[error("zero vector passed to MAC")]
    ZeroVector,

    #[error("degenerate left/right pair: psi phi = 0 for mode {0}")]
    DegeneratePair(usize),

    #[error("network is disconnected: bus {0} is unreachable")]
    DisconnectedNetwork(usize),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("parameter value {0} is not available from this provider")]
    ParameterNotAvailable(f64),

    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
