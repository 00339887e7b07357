use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trajectory became singular at t = {blowup_time:.6}")]
    SingularTrajectory { blowup_time: f64 },

    #[error("newton search diverged after {iterations} iterations (|F| = {residual:.3e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("unresolved fold between theta = {theta_lo:.9} and theta = {theta_hi:.9}")]
    UnresolvedFold { theta_lo: f64, theta_hi: f64 },

    #[error("position {x} is not covered by foliation {label}")]
    NotCovering { label: i32, x: f64 },

    #[error("wavefunction tail amplitude {amplitude:.3e} at the grid edge exceeds {limit:.1e}")]
    DomainTooSmall { amplitude: f64, limit: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("prefactor branch could not be resolved: {0}")]
    BranchUnresolved(String),

    #[error("point lies outside the singularity map window")]
    OutsideWindow,

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
