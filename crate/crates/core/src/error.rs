use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("layer {layer}: {detail}")]
    Layer { layer: String, detail: String },

    #[error("non-finite gradient in parameter block {block}")]
    NonFiniteGradient { block: String },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("sequence has {len} frames but at least {required} are required")]
    SequenceTooShort { len: usize, required: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("no frame files found in {}", .0.display())]
    EmptyDirectory(PathBuf),

    #[error("{}: malformed PGM: {detail}", path.display())]
    MalformedPgm { path: PathBuf, detail: String },

    #[error("{}: frame is {found_h}x{found_w}, expected {expected_h}x{expected_w}", path.display())]
    InconsistentFrame {
        path: PathBuf,
        expected_h: usize,
        expected_w: usize,
        found_h: usize,
        found_w: usize,
    },

    #[error("bad magic: not a checkpoint file")]
    BadMagic,

    #[error("truncated checkpoint: {0}")]
    Truncated(String),

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("{}: malformed CSV: {detail}", path.display())]
    MalformedCsv { path: PathBuf, detail: String },

    #[error("manifest: {0}")]
    Manifest(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::MalformedCsv {
            path: path.into(),
            detail: err.to_string(),
        }
    }
}
