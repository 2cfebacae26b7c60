use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the observer, planner, scene model and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Camera, goal and feature are collinear, so the regressor is undefined.
    #[error("degenerate bearing for feature {feature} at t={t}")]
    DegenerateBearing { feature: usize, t: f64 },

    /// A feature left the field of view (or went behind the camera).
    #[error("feature {feature} left the field of view at t={t}")]
    FeatureLost { feature: usize, t: f64 },

    #[error("integral window does not cover [{start}, {end}]")]
    InsufficientBuffer { start: f64, end: f64 },

    #[error("history stack has not met the excitation threshold")]
    NotYetExcited,

    #[error("parse error at `{key}`: {message}")]
    Parse { key: String, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for the errors that abort a closed-loop run mid-flight.
    pub fn is_simulation_abort(&self) -> bool {
        matches!(
            self,
            Error::FeatureLost { .. } | Error::DegenerateBearing { .. } | Error::InsufficientBuffer { .. }
        )
    }

    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Validation { .. } | Error::NotSpd(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
