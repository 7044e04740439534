//! Crate-wide error type.
//!
//! Every variant carries a stable short code (see [`Error::code`]) so batch
//! drivers can emit machine-parseable one-line failures.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A scene specification violates its invariants.
    #[error("invalid scene spec: {0}")]
    InvalidScene(String),

    /// A defect specification is inconsistent or out of bounds.
    #[error("invalid defect spec: {0}")]
    InvalidDefect(String),

    /// Two injected defects share pixels.
    #[error("overlapping defects: instances {0} and {1} share pixels")]
    OverlappingDefects(usize, usize),

    /// An annotation document could not be parsed.
    #[error("malformed annotation document: {0}")]
    MalformedDocument(String),

    /// A label string is not one of the six known defect classes.
    #[error("unknown defect label {label:?}")]
    UnknownLabel { label: String },

    /// A category id outside 1..=6 was encountered.
    #[error("unknown category id {0}")]
    UnknownCategory(u32),

    /// An annotation shape is not a polygon.
    #[error("unsupported shape type {shape_type:?} at shape index {index}")]
    UnsupportedShape { index: usize, shape_type: String },

    /// A polygon has fewer than 3 points or non-finite coordinates.
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    /// A run-length encoding is internally inconsistent.
    #[error("invalid RLE: {0}")]
    InvalidRle(String),

    /// Two masks with different dimensions were combined.
    #[error("mask dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),

    /// An argument fell outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// No periodic line/space structure was found in an image.
    #[error("no periodic pattern detected: {0}")]
    NoPattern(String),

    /// A prediction record failed validation.
    #[error("invalid prediction record {index}: {reason}")]
    InvalidPrediction { index: usize, reason: String },

    /// A prediction references an image id absent from the ground truth.
    #[error("prediction references unknown image id {0:?}")]
    UnknownImageId(String),

    /// Duplicate image ids in a collection that requires unique ids.
    #[error("duplicate image id {0:?}")]
    DuplicateImageId(String),

    /// An image file could not be decoded or has the wrong format.
    #[error("image format error: {0}")]
    ImageFormat(String),

    /// Filesystem failure, with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-parseable code for this error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidScene(_) => "E_SCENE",
            Error::InvalidDefect(_) => "E_DEFECT",
            Error::OverlappingDefects(_, _) => "E_OVERLAP",
            Error::MalformedDocument(_) => "E_PARSE",
            Error::UnknownLabel { .. } => "E_LABEL",
            Error::UnknownCategory(_) => "E_CATEGORY",
            Error::UnsupportedShape { .. } => "E_SHAPE",
            Error::InvalidPolygon(_) => "E_POLYGON",
            Error::InvalidRle(_) => "E_RLE",
            Error::DimensionMismatch(..) => "E_DIM",
            Error::InvalidArgument(_) => "E_ARG",
            Error::NoPattern(_) => "E_NOPATTERN",
            Error::InvalidPrediction { .. } => "E_PRED",
            Error::UnknownImageId(_) => "E_IMAGEID",
            Error::DuplicateImageId(_) => "E_DUPID",
            Error::ImageFormat(_) => "E_IMAGE",
            Error::Io { .. } => "E_IO",
        }
    }

    /// Wrap an [`std::io::Error`] with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
