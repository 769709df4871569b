use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("direction is not unit length (norm {norm})")]
    NonUnitDirection { norm: f64 },

    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("profile does not decay at its ends: |value| = {edge:e} exceeds {limit:e} (tail tolerance relative to max); the periodic filter would wrap around")]
    NotDecaying { edge: f64, limit: f64 },

    #[error("grid [{lo:?}, {hi:?}] does not cover the phantom extent (radius {radius} around {center:?})")]
    GridDoesNotCover {
        lo: [f64; 3],
        hi: [f64; 3],
        center: [f64; 3],
        radius: f64,
    },

    #[error("evaluation point s = {s} lies outside the profile range [{s_min}, {s_max}]")]
    OutOfRange { s: f64, s_min: f64, s_max: f64 },

    #[error("raw inversion is identically zero at the calibration points")]
    DegenerateCalibration,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("malformed metadata: {0}")]
    Metadata(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(arg: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            arg,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
