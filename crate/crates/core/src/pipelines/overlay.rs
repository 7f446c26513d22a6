//! Overlay images: reference boxes outlined in the colour of their source.

use super::{RefRecord, Source};
use crate::imgproc::RasterImage;

pub const OUTLINE_WIDTH: u32 = 3;
pub const COLOR_LAYOUT_ONLY: [u8; 3] = [255, 255, 0];
pub const COLOR_TEXT_ONLY: [u8; 3] = [0, 0, 255];
pub const COLOR_BOTH: [u8; 3] = [0, 255, 0];

pub fn source_color(source: Source) -> [u8; 3] {
    match source {
        Source::LayoutOnly => COLOR_LAYOUT_ONLY,
        Source::TextOnly => COLOR_TEXT_ONLY,
        Source::Both => COLOR_BOTH,
    }
}

/// Draws a 3-px outline inside each record's box (clipped to the page).
/// Text-only boxes are drawn first, then layout-only, then both, so green
/// wins where outlines overlap. Without any box the page is returned as is;
/// otherwise the result is RGB.
pub fn render_overlay(page: &RasterImage, records: &[RefRecord]) -> RasterImage {
    let boxed: Vec<&RefRecord> = records.iter().filter(|r| r.bbox.is_some()).collect();
    if boxed.is_empty() {
        return page.clone();
    }
    let mut out = page.to_rgb();
    let (w, h) = (out.width(), out.height());
    for source in [Source::TextOnly, Source::LayoutOnly, Source::Both] {
        let color = source_color(source);
        for r in boxed.iter().filter(|r| r.source == source) {
            let b = r.bbox.unwrap();
            let (x1, y1) = (b.right().min(w), b.bottom().min(h));
            for y in b.y.min(h)..y1 {
                for x in b.x.min(w)..x1 {
                    let edge = x < b.x + OUTLINE_WIDTH
                        || y < b.y + OUTLINE_WIDTH
                        || x + OUTLINE_WIDTH >= b.right()
                        || y + OUTLINE_WIDTH >= b.bottom();
                    if edge {
                        out.set_pixel(x, y, &color);
                    }
                }
            }
        }
    }
    out
}
