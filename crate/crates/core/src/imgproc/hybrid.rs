//! Packing of the pre-processing planes into one three-channel image.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    binarize_inverted, dilate, distance_transform, normalize_distance, to_grayscale, BinaryImage,
    DistanceMetric, ImageError, OtsuThreshold, RasterImage, DEFAULT_KERNEL_HEIGHT,
    DEFAULT_KERNEL_WIDTH,
};

/// Which pre-processing steps feed the hybrid image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreprocessMode {
    /// distance transform | binarized | dilated
    #[default]
    Full,
    /// grayscale | binarized | dilated
    DilationOnly,
    /// grayscale | grayscale | grayscale
    None,
}

impl PreprocessMode {
    pub const ALL: [PreprocessMode; 3] = [Self::Full, Self::DilationOnly, Self::None];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::DilationOnly => "dilation-only",
            Self::None => "none",
        }
    }

    /// Row label used in ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            Self::Full => "Dilation + Distance Transform",
            Self::DilationOnly => "Dilation",
            Self::None => "No Pre-processing",
        }
    }
}

impl fmt::Display for PreprocessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PreprocessMode {
    type Err = ImageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Self::Full),
            "dilation-only" | "dilation" => Ok(Self::DilationOnly),
            "none" => Ok(Self::None),
            other => Err(ImageError::InvalidConfig(format!(
                "unknown pre-processing mode `{other}` (expected full, dilation-only or none)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub metric: DistanceMetric,
    pub kernel_width: u32,
    pub kernel_height: u32,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            metric: DistanceMetric::Chamfer3x3,
            kernel_width: DEFAULT_KERNEL_WIDTH,
            kernel_height: DEFAULT_KERNEL_HEIGHT,
        }
    }
}

/// Three-channel hybrid representation of a page.
///
/// Channel order is fixed per mode; see [`PreprocessMode`].
#[derive(Debug, Clone, PartialEq)]
pub struct HybridImage {
    planes: RasterImage,
    mode: PreprocessMode,
    threshold: OtsuThreshold,
    distance_saturated: bool,
}

impl HybridImage {
    pub const DISTANCE_CHANNEL: usize = 0;
    pub const BINARY_CHANNEL: usize = 1;
    pub const DILATED_CHANNEL: usize = 2;

    pub fn planes(&self) -> &RasterImage {
        &self.planes
    }

    pub fn into_planes(self) -> RasterImage {
        self.planes
    }

    pub fn mode(&self) -> PreprocessMode {
        self.mode
    }

    pub fn width(&self) -> u32 {
        self.planes.width()
    }

    pub fn height(&self) -> u32 {
        self.planes.height()
    }

    pub fn threshold(&self) -> OtsuThreshold {
        self.threshold
    }

    /// True when the page had no ink, so the distance plane carries no information.
    pub fn distance_saturated(&self) -> bool {
        self.distance_saturated
    }

    pub fn channel(&self, index: usize) -> RasterImage {
        self.planes.channel(index).expect("hybrid images always have 3 channels")
    }

    /// The ink mask, when the mode stores one.
    pub fn binary_plane(&self) -> Option<BinaryImage> {
        match self.mode {
            PreprocessMode::None => None,
            _ => BinaryImage::from_raster(&self.channel(Self::BINARY_CHANNEL)).ok(),
        }
    }

    /// The dilated ink mask, when the mode stores one.
    pub fn dilated_plane(&self) -> Option<BinaryImage> {
        match self.mode {
            PreprocessMode::None => None,
            _ => BinaryImage::from_raster(&self.channel(Self::DILATED_CHANNEL)).ok(),
        }
    }
}

pub fn compose_hybrid(original: &RasterImage, mode: PreprocessMode) -> Result<HybridImage, ImageError> {
    compose_hybrid_with(original, mode, &HybridConfig::default())
}

pub fn compose_hybrid_with(
    original: &RasterImage,
    mode: PreprocessMode,
    cfg: &HybridConfig,
) -> Result<HybridImage, ImageError> {
    let gray = to_grayscale(original)?;
    let binarized = binarize_inverted(&gray)?;
    if mode == PreprocessMode::None {
        let planes = RasterImage::from_planes([&gray, &gray, &gray])?;
        return Ok(HybridImage {
            planes,
            mode,
            threshold: binarized.threshold,
            distance_saturated: false,
        });
    }

    let dilated = dilate(&binarized.mask, cfg.kernel_width, cfg.kernel_height)?.to_raster();
    let binary = binarized.mask.to_raster();
    let (first, saturated) = match mode {
        PreprocessMode::Full => {
            let dm = distance_transform(&binarized.mask, cfg.metric);
            (normalize_distance(&dm), dm.is_saturated())
        }
        _ => (gray, false),
    };
    Ok(HybridImage {
        planes: RasterImage::from_planes([&first, &binary, &dilated])?,
        mode,
        threshold: binarized.threshold,
        distance_saturated: saturated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page_with_text() -> RasterImage {
        let mut img = RasterImage::filled(40, 20, 255).unwrap();
        for x in (4..30).filter(|x| x % 4 != 0) {
            for y in 5..9 {
                img.set_pixel(x, y, &[0]);
            }
            for y in 13..16 {
                img.set_pixel(x, y, &[10]);
            }
        }
        img
    }

    #[test]
    fn blank_page_planes() {
        let h = compose_hybrid(&RasterImage::filled(8, 8, 255).unwrap(), PreprocessMode::Full).unwrap();
        assert!(h.distance_saturated());
        for c in 0..3 {
            assert!(h.channel(c).data().iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn none_mode_triplicates_gray() {
        let img = page_with_text();
        let h = compose_hybrid(&img, PreprocessMode::None).unwrap();
        for c in 0..3 {
            assert_eq!(h.channel(c), img);
        }
        assert!(h.binary_plane().is_none());
    }

    #[test]
    fn dilation_only_keeps_gray_in_first_channel() {
        let img = page_with_text();
        let h = compose_hybrid(&img, PreprocessMode::DilationOnly).unwrap();
        assert_eq!(h.channel(0), img);
        assert!(h.binary_plane().unwrap().is_subset_of(&h.dilated_plane().unwrap()));
    }

    #[test]
    fn binary_plane_is_inside_dilated_plane() {
        let h = compose_hybrid(&page_with_text(), PreprocessMode::Full).unwrap();
        let bin = h.binary_plane().unwrap();
        assert!(bin.foreground_count() > 0);
        assert!(bin.is_subset_of(&h.dilated_plane().unwrap()));
    }

    #[test]
    fn mode_names_round_trip() {
        for m in PreprocessMode::ALL {
            assert_eq!(m.as_str().parse::<PreprocessMode>().unwrap(), m);
        }
        assert!("sharpen".parse::<PreprocessMode>().is_err());
    }
}
