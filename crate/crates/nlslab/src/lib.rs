//! Configuration, persistence, run orchestration and the command line for
//! [`nlslab_core`].

pub mod cli;
pub mod config;
pub mod plot;
pub mod records;
pub mod runner;
pub mod validate;
pub mod wavefield_io;

use thiserror::Error;

/// Everything the command line can fail with.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Run(#[from] runner::RunError),
    #[error(transparent)]
    Record(#[from] records::RecordError),
    #[error(transparent)]
    Plot(#[from] plot::PlotError),
    #[error(transparent)]
    Trend(#[from] runner::TrendError),
    #[error(transparent)]
    Admissible(#[from] nlslab_core::admissible::AdmissibleError),
    #[error("{0}")]
    Usage(String),
    #[error("internal sentinel fired: {0}")]
    Sentinel(String),
}

impl Error {
    /// 2 invalid input, 3 IO, 4 internal sentinel.
    pub fn exit_code(&self) -> u8 {
        use records::RecordError;
        use runner::RunError;
        match self {
            Error::Config(config::ConfigError::Io { .. }) => 3,
            Error::Run(e) if e.is_io() => 3,
            Error::Run(
                RunError::Diagnostics(_)
                | RunError::Field(_)
                | RunError::Metadata(_)
                | RunError::Pool(_),
            ) => 4,
            Error::Run(RunError::Propagator(nlslab_core::PropagatorError::NonFinite {
                ..
            })) => 4,
            Error::Record(RecordError::Io(_)) | Error::Plot(plot::PlotError::Io { .. }) => 3,
            Error::Plot(plot::PlotError::Record(RecordError::Io(_))) => 3,
            Error::Sentinel(_) => 4,
            _ => 2,
        }
    }
}
