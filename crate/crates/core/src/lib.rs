//! Unsupervised segmentation of microscope cell images.
//!
//! The pipeline decomposes an 8-bit grayscale image into its eight bit
//! planes, runs a binary Markov Random Field optimization (ICM or simulated
//! annealing) from each plane as the initial labelling, and fuses the eight
//! results by pixelwise voting into a confidence map. Thresholding the map
//! at a confidence level yields the final mask. The [`metrics`] module
//! provides the pixelwise evaluation measures (symmetric difference,
//! sensitivity, specificity, PPV, F-score, Rand index) and an empirical ROC
//! with trapezoidal AUC; [`harness`] batch-evaluates a dataset directory.

pub mod bitplane;
pub mod ensemble;
pub mod harness;
pub mod imageio;
pub mod metrics;
pub mod mrf;
pub mod synth;

use std::path::PathBuf;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to decode {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("failed to encode {path}: {source}")]
    Encode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("zero-sized image")]
    ZeroSized,
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("directory not found: {0}")]
    DirectoryNotFound(PathBuf),
    #[error("confidence level {0} out of range 0..=7")]
    LevelOutOfRange(u8),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("dataset {0} contains no paired images")]
    EmptyDataset(PathBuf),
    #[error("ground truth contains a single class; ROC is undefined")]
    SingleClassGroundTruth,
    #[error("empty mask")]
    EmptyMask,
}

pub type Result<T> = std::result::Result<T, Error>;
