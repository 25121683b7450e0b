//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the core pipeline.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Malformed input file (ragged rows, unparseable tokens, ...).
    #[error("format error: {0}")]
    Format(String),

    /// Structurally valid input that violates a dataset contract.
    #[error("data error: {0}")]
    Data(String),

    /// Invalid operation parameter (window too long, zero segments, ...).
    #[error("parameter error: {0}")]
    Param(String),

    /// Invalid extractor or kernel configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Model/feature dimension mismatch.
    #[error("model error: {0}")]
    Model(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    TrainingDiverged { epoch: usize, batch: usize },

    /// A whole experiment run could not produce any usable configuration.
    #[error("run error: {0}")]
    Run(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
