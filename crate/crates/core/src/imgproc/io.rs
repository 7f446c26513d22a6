//! PNG / TIFF reading and writing, plus PDF rasterization through an
//! external command.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat};
use serde::{Deserialize, Serialize};

use super::{ImageError, RasterImage};
use crate::adapter::{CommandAdapter, CommandConfig};

pub fn load_raster(path: &Path) -> Result<RasterImage, ImageError> {
    let img = image::open(path).map_err(|e| ImageError::Codec(format!("{}: {e}", path.display())))?;
    from_dynamic(img)
}

pub fn decode_raster(bytes: &[u8]) -> Result<RasterImage, ImageError> {
    let img = image::load_from_memory(bytes).map_err(|e| ImageError::Codec(e.to_string()))?;
    from_dynamic(img)
}

fn from_dynamic(img: DynamicImage) -> Result<RasterImage, ImageError> {
    let (w, h) = (img.width(), img.height());
    match img {
        DynamicImage::ImageLuma8(buf) => RasterImage::new(w, h, 1, buf.into_raw()),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            RasterImage::new(w, h, 1, img.to_luma8().into_raw())
        }
        other => RasterImage::new(w, h, 3, other.to_rgb8().into_raw()),
    }
}

fn to_dynamic(img: &RasterImage) -> DynamicImage {
    let (w, h) = (img.width(), img.height());
    let data = img.data().to_vec();
    if img.channels() == 1 {
        DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, data).expect("validated buffer"))
    } else {
        DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, data).expect("validated buffer"))
    }
}

/// Writes PNG or TIFF depending on the file extension.
pub fn save_raster(img: &RasterImage, path: &Path) -> Result<(), ImageError> {
    let format = ImageFormat::from_path(path)
        .ok()
        .filter(|f| matches!(f, ImageFormat::Png | ImageFormat::Tiff))
        .ok_or_else(|| {
            ImageError::Codec(format!(
                "{}: only .png and .tif/.tiff outputs are supported",
                path.display()
            ))
        })?;
    to_dynamic(img)
        .save_with_format(path, format)
        .map_err(|e| ImageError::Codec(format!("{}: {e}", path.display())))
}

pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>, ImageError> {
    let mut out = Cursor::new(Vec::new());
    to_dynamic(img)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ImageError::Codec(e.to_string()))?;
    Ok(out.into_inner())
}

fn default_dpi() -> u32 {
    300
}

/// Multi-page PDF rasterization via an external tool (e.g. `pdftoppm`).
///
/// The command receives `{input}` (the PDF), `{output}` (a file prefix inside
/// a scratch directory) and `{dpi}`; every PNG/TIFF it writes into the scratch
/// directory becomes a page, in file-name order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterizerConfig {
    pub command: CommandConfig,
    #[serde(default = "default_dpi")]
    pub dpi: u32,
}

impl Default for RasterizerConfig {
    fn default() -> Self {
        Self {
            command: CommandConfig::new(
                "pdftoppm",
                &["-r", "{dpi}", "-png", "{input}", "{output}"],
            ),
            dpi: default_dpi(),
        }
    }
}

pub fn rasterize_pdf(pdf: &Path, cfg: &RasterizerConfig) -> Result<Vec<RasterImage>, ImageError> {
    let scratch = tempfile::tempdir().map_err(|e| ImageError::Io(e.to_string()))?;
    let prefix = scratch.path().join("page");
    let dpi = cfg.dpi.to_string();
    CommandAdapter::new(cfg.command.clone())
        .run(
            &[
                ("input", &pdf.to_string_lossy()),
                ("output", &prefix.to_string_lossy()),
                ("dpi", &dpi),
            ],
            None,
        )
        .map_err(|e| ImageError::Adapter(e.to_string()))?;

    let mut pages: Vec<PathBuf> = std::fs::read_dir(scratch.path())
        .map_err(|e| ImageError::Io(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                ImageFormat::from_path(p),
                Ok(ImageFormat::Png) | Ok(ImageFormat::Tiff)
            )
        })
        .collect();
    pages.sort();
    if pages.is_empty() {
        return Err(ImageError::Adapter(format!(
            "rasterizer produced no pages for {}",
            pdf.display()
        )));
    }
    pages.iter().map(|p| load_raster(p)).collect()
}
