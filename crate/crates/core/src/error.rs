use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while loading inputs, building a corpus or rendering.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unreadable wav file {path}: {message}")]
    Wav { path: PathBuf, message: String },
    #[error("unsupported sample rate {0} Hz (expected 48000)")]
    UnsupportedSampleRate(u32),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("malformed trace row {row}: {message}")]
    MalformedTrace { row: usize, message: String },
    #[error("trace not sampled at 100 Hz (row {row})")]
    NonUniformTrace { row: usize },
    #[error("empty trace")]
    EmptyTrace,
    #[error("no fragments: clip and trace do not overlap by a full 480-sample window")]
    NoFragments,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no fragment has a speed of at least v_min = {0} mm/s")]
    NoMovingFragments(f64),
    #[error("corpus build failed: {retained} fragments retained, at least {required} required")]
    TooFewFragments { retained: usize, required: usize },
    #[error("unsupported corpus format_version {0}")]
    FormatVersion(u64),
    #[error("malformed corpus file {path}: {message}")]
    CorpusFormat { path: PathBuf, message: String },
    #[error("audio digest mismatch for {path}: manifest {expected}, file {actual}")]
    DigestMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },
    #[error("all retained fragments are silent (mean ratio is 0)")]
    SilentCorpus,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("too few pointer events: {0}")]
    TooFewEvents(String),
    #[error("pointer timestamps not strictly increasing at event {0}")]
    NonMonotonicEvents(usize),
    #[error("smoothing window must be odd and at least 1, got {0}")]
    EvenWindow(usize),
    #[error("differentiation needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
