use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the tracking toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular geometry: target within {range:e} m of radar {radar_id}")]
    SingularGeometry { radar_id: u32, range: f64 },

    #[error("numerical degeneracy: {0}")]
    Numerical(String),

    #[error("association weights are all zero")]
    DegenerateWeights,

    #[error("no candidate measurements and no clutter mass")]
    NoMeasurement,

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("scenario validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("frame {frame}, target {target}: {source}")]
    Run {
        frame: usize,
        target: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("monte carlo aborted: {failed} of {total} runs failed")]
    TooManyFailures { failed: usize, total: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True when the error (or the error it wraps) is a numerical failure
    /// rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_)
            | Error::DegenerateWeights
            | Error::SingularGeometry { .. }
            | Error::TooManyFailures { .. } => true,
            Error::Run { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
