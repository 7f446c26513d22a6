//! Annotated reference-detection datasets: manifest loading and validation,
//! per-split statistics, and a seeded synthetic page generator.

mod manifest;
mod stats;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manifest::{
    import_csv, load_manifest, save_manifest, AnnotatedPage, DatasetManifest, Split, Splits,
    ValidationIssue, ValidationReport,
};
pub use stats::{split_stats, SplitStats, StatsRow};
pub use synth::{
    synth_dataset, synth_fitting_page, synth_page, RefStyle, SynthDataset, SynthPage, SynthSpec,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest parse error: {0}")]
    Parse(String),
    #[error("manifest validation failed:\n{0}")]
    Validation(ValidationReport),
    #[error("invalid synthetic page spec: {0}")]
    InvalidSpec(String),
    #[error("{0} references do not fit on the page")]
    DoesNotFit(usize),
    #[error(transparent)]
    Image(#[from] crate::imgproc::ImageError),
}

/// Axis-aligned box in pixels; origin top-left, y pointing down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RefBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl RefBox {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    /// Box spanning the half-open pixel ranges `[x0, x1) x [y0, y1)`.
    pub fn from_corners(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        Self::new(x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn intersection(&self, other: &RefBox) -> Option<RefBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| RefBox::from_corners(x0, y0, x1, y1))
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &RefBox) -> RefBox {
        RefBox::from_corners(
            self.x.min(other.x),
            self.y.min(other.y),
            self.right().max(other.right()),
            self.bottom().max(other.bottom()),
        )
    }

    pub fn contains_point(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.right() <= width && self.bottom() <= height
    }
}

impl fmt::Display for RefBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}x{})", self.x, self.y, self.w, self.h)
    }
}

/// Column layout of a page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Single,
    Double,
    Triple,
}

impl Layout {
    pub const ALL: [Layout; 3] = [Layout::Single, Layout::Double, Layout::Triple];

    pub fn columns(self) -> u32 {
        match self {
            Layout::Single => 1,
            Layout::Double => 2,
            Layout::Triple => 3,
        }
    }

    pub fn from_columns(n: u32) -> Option<Self> {
        match n {
            1 => Some(Layout::Single),
            2 => Some(Layout::Double),
            3 => Some(Layout::Triple),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Layout::Single => "Single Column",
            Layout::Double => "Double Column",
            Layout::Triple => "Triple Column",
        }
    }
}

impl FromStr for Layout {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "single" | "1" => Ok(Layout::Single),
            "double" | "2" => Ok(Layout::Double),
            "triple" | "3" => Ok(Layout::Triple),
            other => Err(DatasetError::InvalidSpec(format!("unknown layout `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intersection_and_union() {
        let a = RefBox::new(0, 0, 10, 10);
        let b = RefBox::new(5, 0, 10, 10);
        assert_eq!(a.intersection(&b), Some(RefBox::new(5, 0, 5, 10)));
        assert_eq!(a.union(&b), RefBox::new(0, 0, 15, 10));
        assert_eq!(a.intersection(&RefBox::new(10, 0, 3, 3)), None);
    }

    #[test]
    fn bounds() {
        let b = RefBox::new(2, 3, 4, 5);
        assert!(b.fits_within(6, 8));
        assert!(!b.fits_within(5, 8));
        assert!(b.contains_point(5, 7));
        assert!(!b.contains_point(6, 7));
    }
}
