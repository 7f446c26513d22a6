//! Pixel-level pre-processing: grayscale, OTSU binarization, distance
//! transform, dilation, and the three-channel hybrid image built from them.
//!
//! All operations are pure functions of their inputs and may be called from
//! any number of threads.

mod distance;
mod hybrid;
mod io;
mod morphology;
mod raster;
mod threshold;

use thiserror::Error;

pub use distance::{
    distance_transform, normalize_distance, DistanceMap, DistanceMetric, CHAMFER_AXIAL,
    CHAMFER_DIAGONAL, SATURATED_DISTANCE,
};
pub use hybrid::{compose_hybrid, compose_hybrid_with, HybridConfig, HybridImage, PreprocessMode};
pub use io::{decode_raster, encode_png, load_raster, rasterize_pdf, save_raster, RasterizerConfig};
pub use morphology::{dilate, DEFAULT_KERNEL_HEIGHT, DEFAULT_KERNEL_WIDTH};
pub use raster::{BinaryImage, RasterImage};
pub use threshold::{
    binarize_inverted, histogram, otsu_from_histogram, otsu_threshold, to_grayscale, Binarized,
    OtsuThreshold,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("image codec error: {0}")]
    Codec(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("rasterizer error: {0}")]
    Adapter(String),
}
