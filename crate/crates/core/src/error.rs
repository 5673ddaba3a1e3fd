use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel singularity: points {i} and {j} coincide (distance {distance:e})")]
    Singularity { i: usize, j: usize, distance: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("spectral sum did not converge within {degree_cap} degrees (partial value {partial:e})")]
    Convergence { partial: f64, degree_cap: usize },

    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64, tol: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("line search stagnated after {} iterations at energy {:e}", .0.iters, .0.energy)]
    Stagnation(Box<StagnatedIterate>),
}

/// Best point set reached before the optimizer's line search gave up.
#[derive(Debug, Clone, PartialEq)]
pub struct StagnatedIterate {
    pub d: usize,
    /// Row-major coordinates, `d + 1` per point.
    pub coords: Vec<f64>,
    pub energy: f64,
    pub iters: usize,
    pub restart_index: usize,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
