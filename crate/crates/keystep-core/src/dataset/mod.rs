//! Dataset abstraction: manifests, feature files, segment pooling.
//!
//! A manifest is a single JSON document indexing takes, views, segments
//! and labels. Frame-level features live in `.glvf` files, a little-endian
//! binary format that round-trips bit-exactly. Everything here is immutable
//! after load and safe to share across worker threads.

mod features;
mod manifest;
mod pooling;

pub use features::{load_features, write_features, FeatureTable, FEATURE_MAGIC, FEATURE_VERSION};
pub use manifest::{
    load_manifest, write_manifest, Manifest, SegmentAnnotation, TakeRecord, ViewRecord,
};
pub use pooling::{pool_segment_features, Dataset, LoadedDataset, PooledTake};

use std::path::PathBuf;
use thiserror::Error;

/// Errors raised while loading or validating dataset files.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {path}")]
    MissingFile { path: PathBuf },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest schema violation at `{field}`: {reason}")]
    SchemaViolation { field: String, reason: String },
    #[error(
        "label {label} out of range [0, {num_classes}) in take `{take_id}` segment {segment_index}"
    )]
    LabelOutOfRange {
        take_id: String,
        segment_index: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("segments of take `{take_id}` not sorted strictly by start_time at index {segment_index}")]
    UnsortedSegments {
        take_id: String,
        segment_index: usize,
    },
    #[error("bad magic in {path}: not a feature file")]
    BadMagic { path: PathBuf },
    #[error("unsupported feature format version {version} in {path}")]
    UnsupportedVersion { path: PathBuf, version: u32 },
    #[error("bad feature header in {path}: {reason}")]
    BadHeader { path: PathBuf, reason: String },
    #[error("truncated feature file: {path}")]
    TruncatedFile { path: PathBuf },
    #[error("trailing bytes after feature data in {path}")]
    TrailingBytes { path: PathBuf },
    #[error("non-finite value at row {row}, col {col} of {path}")]
    NonFiniteValue {
        path: PathBuf,
        row: usize,
        col: usize,
    },
    #[error(
        "feature shape mismatch for {path}: expected {expected_rows}x{expected_cols}, found {rows}x{cols}"
    )]
    ShapeMismatch {
        path: PathBuf,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("invalid feature table: {reason}")]
    InvalidTable { reason: String },
}

impl DataError {
    /// Stable machine-readable category, module-qualified.
    pub fn category(&self) -> &'static str {
        match self {
            DataError::MissingFile { .. } => "datamodel.MissingFile",
            DataError::Io { .. } => "datamodel.Io",
            DataError::SchemaViolation { .. } => "datamodel.SchemaViolation",
            DataError::LabelOutOfRange { .. } => "datamodel.LabelOutOfRange",
            DataError::UnsortedSegments { .. } => "datamodel.UnsortedSegments",
            DataError::BadMagic { .. } => "datamodel.BadMagic",
            DataError::UnsupportedVersion { .. } => "datamodel.UnsupportedVersion",
            DataError::BadHeader { .. } => "datamodel.BadHeader",
            DataError::TruncatedFile { .. } => "datamodel.TruncatedFile",
            DataError::TrailingBytes { .. } => "datamodel.TrailingBytes",
            DataError::NonFiniteValue { .. } => "datamodel.NonFiniteValue",
            DataError::ShapeMismatch { .. } => "datamodel.ShapeMismatch",
            DataError::InvalidTable { .. } => "datamodel.InvalidTable",
        }
    }
}
