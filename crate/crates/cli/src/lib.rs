//! Experiment drivers for Riesz energy minimizers: sweeps over `N`, log-log
//! exponent fits and a self-check suite.

// Negated comparisons are how NaN arguments get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fit;
pub mod sweep;
pub mod verify;

use std::path::PathBuf;

pub use fit::{fit_exponent, gap_regression, Fit};
pub use sweep::{run_sweep, Fits, OutputPaths, SweepConfig, SweepResult, SweepRow, CSV_HEADER};
pub use verify::{verify, verify_with, CheckResult, Level, VerifyReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("N = {n}, {stage}: {source}")]
    Stage {
        n: usize,
        stage: &'static str,
        #[source]
        source: riesz_sphere::Error,
    },
    #[error(transparent)]
    Core(#[from] riesz_sphere::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
