//! Persistence: weights and dataset files, experiment configs, CSV export.

mod config;
mod csv;
mod dataset_file;
mod weights;

use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig, Preset, PRESET_CODE_SIZES};
pub use csv::{export_metrics_csv, metrics_csv, CsvTable, METRICS_HEADER};
pub use dataset_file::{decode_dataset, encode_dataset, load_dataset, save_dataset, DATASET_MAGIC};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};

/// Failure to read or write one of the binary or text artifacts.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("not a recognized file (bad magic bytes)")]
    BadMagic,
    #[error("format version {found} is not supported (expected {supported})")]
    Version { found: u16, supported: u16 },
    #[error("file is truncated")]
    Truncated,
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed contents: {0}")]
    Invalid(String),
    #[error("I/O error ({kind:?}): {message}")]
    Io { kind: std::io::ErrorKind, message: String },
}

impl From<std::io::Error> for FormatError {
    fn from(e: std::io::Error) -> Self {
        FormatError::Io { kind: e.kind(), message: e.to_string() }
    }
}
