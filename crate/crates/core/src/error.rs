use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unrecognized format: {0}")]
    UnrecognizedFormat(String),

    #[error("size mismatch: expected {expected} bytes, found {actual}")]
    SizeMismatch { expected: u64, actual: u64 },

    #[error("invalid metadata: {0}")]
    InvalidMeta(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite sample at flat index {0}")]
    NonFinite(usize),

    #[error("band exceeds Nyquist: f_high = {f_high_hz} Hz > {nyquist_hz} Hz")]
    BandExceedsNyquist { f_high_hz: f64, nyquist_hz: f64 },

    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("carrier window out of range: {0}")]
    CarrierOutOfRange(String),

    #[error("stack shorter than window: nt = {nt} < n_win = {n_win}")]
    StackShorterThanWindow { nt: usize, n_win: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("already reverse-contrast")]
    AlreadyReverseContrast,

    #[error("empty ROI mask")]
    EmptyMask,

    #[error("zero artery standard deviation")]
    ZeroArteryStd,

    #[error("all-zero flat-field reference")]
    ZeroReference,

    #[error("decomposition failed in window {window}: {reason}")]
    Decomposition { window: usize, reason: String },

    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} failed at window {window}: {source}")]
    Stage {
        stage: &'static str,
        window: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, window: usize) -> Self {
        Error::Stage {
            stage,
            window,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerics rather than of inputs or files.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Decomposition { .. } | Error::ZeroReference | Error::ZeroArteryStd => true,
            Error::Stage { source, .. } | Error::Frame { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn in_frame(self, frame: usize) -> Self {
        Error::Frame {
            frame,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
