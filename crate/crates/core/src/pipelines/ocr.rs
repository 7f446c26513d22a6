//! OCR behind a small trait: an external command for real documents and a
//! scripted engine that answers with known text for tests and synthetic data.

use std::sync::Arc;

use thiserror::Error;

use crate::adapter::{AdapterError, AdapterPool, CommandAdapter, CommandConfig};
use crate::dataset::{RefBox, SynthPage};
use crate::evalkit::iou;
use crate::imgproc::{encode_png, ImageError, RasterImage};

#[derive(Debug, Error)]
pub enum OcrError {
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("OCR scratch file: {0}")]
    Io(#[from] std::io::Error),
    #[error("OCR output is not UTF-8")]
    NotUtf8,
    #[error("region {region} lies outside the {width}x{height} page")]
    Region { region: RefBox, width: u32, height: u32 },
}

pub trait OcrEngine: Send + Sync {
    fn name(&self) -> &str;

    /// Text of `region` on page `page_index` (0-based), or of the whole page
    /// when `region` is `None`. Lines are separated by `\n`.
    fn recognize(&self, page_index: usize, page: &RasterImage, region: Option<RefBox>) -> Result<String, OcrError>;
}

/// Copies `region` out of `page`.
pub(crate) fn crop(page: &RasterImage, region: RefBox) -> Result<RasterImage, OcrError> {
    if region.is_empty() || !region.fits_within(page.width(), page.height()) {
        return Err(OcrError::Region {
            region,
            width: page.width(),
            height: page.height(),
        });
    }
    let ch = page.channels() as usize;
    let stride = page.width() as usize * ch;
    let mut data = Vec::with_capacity(region.w as usize * region.h as usize * ch);
    for y in region.y..region.bottom() {
        let start = y as usize * stride + region.x as usize * ch;
        data.extend_from_slice(&page.data()[start..start + region.w as usize * ch]);
    }
    Ok(RasterImage::new(region.w, region.h, page.channels(), data)?)
}

/// OCR through an external command such as Tesseract. The command receives
/// `{input}`, a PNG of the page or region, and prints the text on stdout.
#[derive(Debug, Clone)]
pub struct CommandOcr {
    name: String,
    adapter: CommandAdapter,
}

impl CommandOcr {
    pub fn new(name: impl Into<String>, config: CommandConfig) -> Self {
        Self {
            name: name.into(),
            adapter: CommandAdapter::new(config),
        }
    }

    pub fn with_pool(mut self, pool: Arc<AdapterPool>) -> Self {
        self.adapter = self.adapter.with_pool(pool);
        self
    }

    /// Default Tesseract invocation.
    pub fn tesseract_config() -> CommandConfig {
        CommandConfig::new("tesseract", &["{input}", "stdout", "--psm", "6"])
    }
}

impl OcrEngine for CommandOcr {
    fn name(&self) -> &str {
        &self.name
    }

    fn recognize(&self, _page_index: usize, page: &RasterImage, region: Option<RefBox>) -> Result<String, OcrError> {
        let png = match region {
            Some(r) => encode_png(&crop(page, r)?)?,
            None => encode_png(page)?,
        };
        let mut file = tempfile::Builder::new().suffix(".png").tempfile()?;
        std::io::Write::write_all(&mut file, &png)?;
        let out = self
            .adapter
            .run(&[("input", &file.path().to_string_lossy())], None)?;
        let text = String::from_utf8(out).map_err(|_| OcrError::NotUtf8)?;
        // Tesseract ends pages with a form feed.
        Ok(text
            .lines()
            .map(|l| l.trim_end_matches('\u{c}').trim_end())
            .collect::<Vec<_>>()
            .join("\n")
            .trim_matches('\n')
            .to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedPage {
    /// Known text per region.
    pub regions: Vec<(RefBox, String)>,
    pub full_text: String,
}

/// Null OCR adapter: answers with known text instead of reading pixels.
/// A region query returns the text of the known region with the highest
/// IoU, provided it reaches 0.5; otherwise the empty string.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedOcr {
    pages: Vec<ScriptedPage>,
}

impl ScriptedOcr {
    pub const MIN_IOU: f64 = 0.5;

    pub fn new(pages: Vec<ScriptedPage>) -> Self {
        Self { pages }
    }

    /// Uses the generator's reference texts and full text of each page.
    pub fn from_synth(pages: &[SynthPage]) -> Self {
        Self::new(
            pages
                .iter()
                .map(|p| ScriptedPage {
                    regions: p.page.boxes.iter().copied().zip(p.texts.iter().cloned()).collect(),
                    full_text: p.full_text(),
                })
                .collect(),
        )
    }
}

impl OcrEngine for ScriptedOcr {
    fn name(&self) -> &str {
        "scripted"
    }

    fn recognize(&self, page_index: usize, _page: &RasterImage, region: Option<RefBox>) -> Result<String, OcrError> {
        let Some(page) = self.pages.get(page_index) else {
            return Ok(String::new());
        };
        let Some(region) = region else {
            return Ok(page.full_text.clone());
        };
        let best = page
            .regions
            .iter()
            .map(|(b, t)| (iou(b, &region), t))
            .filter(|(v, _)| *v >= Self::MIN_IOU)
            .max_by(|a, b| a.0.total_cmp(&b.0));
        Ok(best.map(|(_, t)| t.clone()).unwrap_or_default())
    }
}
