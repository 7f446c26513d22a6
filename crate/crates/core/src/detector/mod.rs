//! Reference detection on hybrid page images.
//!
//! Two sources produce [`Detection`]s: a classical cue-based detector
//! (columns from projection profiles, lines from connected components of the
//! dilated plane, references from spacing and hanging-indent cues) and an
//! adapter reading boxes produced by an external neural model.

mod external;
mod layout;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::RefBox;
use crate::imgproc::{
    binarize_inverted, dilate, HybridImage, ImageError, PreprocessMode, DEFAULT_KERNEL_HEIGHT,
    DEFAULT_KERNEL_WIDTH,
};

pub use external::{
    load_external_all, load_external_detections, non_max_suppression, parse_external,
    save_detections, write_detections, ExternalRecord, NMS_IOU,
};
pub use layout::{extract_lines, extract_lines_with, group_references, segment_columns, LineBlock};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("line {line}: score {score} outside [0, 1]")]
    Score { line: usize, score: f64 },
    #[error("line {line}: box {bbox} exceeds page bounds {width}x{height}")]
    OutOfBounds {
        line: usize,
        bbox: RefBox,
        width: u32,
        height: u32,
    },
    #[error("no detections recorded for page `{0}`")]
    UnknownPage(String),
}

/// A detected reference: its box and a confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: RefBox,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: RefBox, score: f64) -> Self {
        Self { bbox, score }
    }
}

/// Confidence when both the spacing and the indentation cue mark a boundary.
pub const SCORE_BOTH_CUES: f64 = 0.95;
pub const SCORE_ONE_CUE: f64 = 0.75;
/// A column whose lines form a single group.
pub const SCORE_FALLBACK: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Minimum blank vertical strip, as a fraction of page width, that
    /// separates two columns.
    pub column_gap_ratio: f64,
    /// Horizontal gap bridged when joining components into a line. `None`
    /// derives it per page as twice the median gap between neighbours.
    pub line_merge_gap: Option<u32>,
    /// Baseline distance, in multiples of the typical line pitch, that
    /// starts a new reference.
    pub ref_gap_factor: f64,
    pub indent_tolerance: u32,
    pub min_score: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            column_gap_ratio: 0.05,
            line_merge_gap: None,
            ref_gap_factor: 1.6,
            indent_tolerance: 8,
            min_score: 0.25,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |m: String| Err(DetectError::InvalidConfig(m));
        if !(self.column_gap_ratio > 0.0 && self.column_gap_ratio < 1.0) {
            return bad(format!("column_gap_ratio must be in (0, 1), got {}", self.column_gap_ratio));
        }
        if self.line_merge_gap == Some(0) {
            return bad("line_merge_gap must be positive".into());
        }
        if !(self.ref_gap_factor > 0.0 && self.ref_gap_factor.is_finite()) {
            return bad(format!("ref_gap_factor must be positive, got {}", self.ref_gap_factor));
        }
        if self.indent_tolerance == 0 {
            return bad("indent_tolerance must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.min_score) {
            return bad(format!("min_score must be in [0, 1], got {}", self.min_score));
        }
        Ok(())
    }
}

/// Runs the classical detector. Detections are sorted by descending score;
/// equal scores keep reading order.
pub fn detect(img: &HybridImage, cfg: &DetectorConfig) -> Result<Vec<Detection>, DetectError> {
    let mut dets = detect_in_reading_order(img, cfg)?;
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(dets)
}

/// Same detections as [`detect`], ordered by column and then top to bottom.
pub fn detect_in_reading_order(img: &HybridImage, cfg: &DetectorConfig) -> Result<Vec<Detection>, DetectError> {
    cfg.validate()?;
    let (binary, dilated) = match (img.mode(), img.binary_plane(), img.dilated_plane()) {
        (PreprocessMode::Full | PreprocessMode::DilationOnly, Some(b), Some(d)) => (b, d),
        _ => {
            // Without pre-processing planes the detector binarizes the
            // grayscale copy itself.
            let gray = img.channel(0);
            let binary = binarize_inverted(&gray)?.mask;
            let dilated = dilate(&binary, DEFAULT_KERNEL_WIDTH, DEFAULT_KERNEL_HEIGHT)?;
            (binary, dilated)
        }
    };
    let columns = segment_columns(&binary, cfg);
    let lines = extract_lines_with(&binary, &dilated, &columns, cfg);
    Ok(group_references(&lines, cfg)
        .into_iter()
        .filter(|d| d.score >= cfg.min_score)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgproc::{compose_hybrid, RasterImage};

    #[test]
    fn blank_page_has_no_detections() {
        let img = RasterImage::filled(64, 48, 255).unwrap();
        for mode in PreprocessMode::ALL {
            let h = compose_hybrid(&img, mode).unwrap();
            assert!(detect(&h, &DetectorConfig::default()).unwrap().is_empty());
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = DetectorConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.min_score = 1.5;
        assert!(matches!(cfg.validate(), Err(DetectError::InvalidConfig(_))));
        let cfg = DetectorConfig {
            indent_tolerance: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_parses_partial_json() {
        let cfg: DetectorConfig = serde_json::from_str(r#"{"min_score": 0.6}"#).unwrap();
        assert_eq!(cfg.min_score, 0.6);
        assert_eq!(cfg.ref_gap_factor, 1.6);
        assert!(serde_json::from_str::<DetectorConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
