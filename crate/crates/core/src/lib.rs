//! Bibliographic reference detection and extraction.
//!
//! The crate covers the whole chain from a page image to tagged references:
//!
//! * [`imgproc`] builds the hybrid (distance transform / binarized / dilated)
//!   representation of a page,
//! * [`detector`] finds reference boxes on it, natively or from external
//!   model outputs,
//! * [`evalkit`] scores detections COCO-style,
//! * [`textref`] segments and tags reference strings from plain text,
//! * [`pipelines`] routes documents through layout, text and markup
//!   pipelines and writes XML and overlay images,
//! * [`dataset`] loads annotated page sets and generates synthetic ones.

pub mod adapter;
pub mod dataset;
pub mod detector;
pub mod evalkit;
pub mod imgproc;
pub mod pipelines;
pub mod textref;

pub use dataset::RefBox;
pub use detector::Detection;
pub use imgproc::{BinaryImage, HybridImage, PreprocessMode, RasterImage};
