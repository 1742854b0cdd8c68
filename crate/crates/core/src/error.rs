use thiserror::Error;

use crate::matrix::FixtureError;
use crate::measurement::MeasurementError;
use crate::optimizer::OptimizeError;
use crate::oracle::OracleError;
use crate::pauli::EncodingError;
use crate::statevector::SimulationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error. Each pipeline stage has its own error type; the driver
/// wraps failures in [`Error::Stage`] so the failing step is named.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// True for errors caused by bad input (malformed files, inconsistent
    /// configuration) rather than a failure while computing.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_validation(),
            Error::Fixture(FixtureError::Io { source, .. }) => {
                source.kind() == std::io::ErrorKind::NotFound
            }
            Error::Fixture(_) | Error::Config(_) => true,
            Error::Oracle(OracleError::Fixture(_)) => true,
            Error::Encoding(e) => matches!(
                e,
                EncodingError::PaddingRejected { .. }
                    | EncodingError::RegisterTooSmall { .. }
                    | EncodingError::Parse { .. }
            ),
            Error::Measurement(MeasurementError::InvalidNoise(_) | MeasurementError::NoShots) => {
                true
            }
            Error::Optimize(OptimizeError::InvalidConfig(_)) => true,
            _ => false,
        }
    }
}
