//! Macula fovea localization in color fundus images.
//!
//! The pipeline runs a fixed sequence of image stages: grayscale
//! conversion, field-of-view masking, disk-morphology contrast enhancement,
//! histogram equalization, close/open denoising, offset Otsu binarization,
//! and connected-component shape analysis that selects the macula by area
//! and circularity. Every stage is a pure function over immutable rasters,
//! so images can be processed concurrently without shared state.
//!
//! Entry points:
//! - [`pipeline::detect`] / [`pipeline::detect_batch`] run the pipeline.
//! - [`eval::score`] computes confusion-matrix metrics over a batch.
//! - [`phantom::phantom_benchmark`] measures detection quality and speed on
//!   seeded synthetic phantoms.

pub mod blobs;
pub mod enhance;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod morphology;
pub mod phantom;
pub mod pipeline;
pub mod segment;
mod stats;

pub use blobs::{Component, ComponentSet, Connectivity, MaculaCandidate};
pub use enhance::Histogram;
pub use error::{Error, Result};
pub use eval::{GroundTruthRecord, MetricsReport};
pub use imaging::{FovMask, GrayImage, RgbImage};
pub use morphology::{SignedImage, StructuringElement};
pub use phantom::{Phantom, PhantomBenchReport};
pub use pipeline::{
    detect, detect_batch, detect_file, DetectionResult, EqualizationMode, PipelineConfig,
    StageTimings,
};
pub use segment::{BinaryImage, ThresholdReport};
