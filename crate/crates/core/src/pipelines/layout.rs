//! Layout pipeline: hybrid image, detection, OCR per box, tagging.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DetectorAttr, OcrEngine, PhaseTimings, PipelineError, PipelineOutput, RefRecord, Source, Tagger};
use crate::detector::{detect_in_reading_order, DetectorConfig};
use crate::imgproc::{compose_hybrid, PreprocessMode, RasterImage};
use crate::textref::ReferenceString;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutOptions {
    pub detector: DetectorConfig,
    pub mode: PreprocessMode,
}

struct PageResult {
    records: Vec<RefRecord>,
    warnings: Vec<String>,
    timings: PhaseTimings,
}

fn run_page(
    index: usize,
    page: &RasterImage,
    opts: &LayoutOptions,
    ocr: &dyn OcrEngine,
    tagger: &Tagger,
) -> Result<PageResult, PipelineError> {
    let mut timings = PhaseTimings::default();
    let t = Instant::now();
    let hybrid = compose_hybrid(page, opts.mode)?;
    timings.preprocess += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let detections = detect_in_reading_order(&hybrid, &opts.detector)?;
    timings.detect += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut warnings = Vec::new();
    let strings: Vec<ReferenceString> = detections
        .iter()
        .map(|d| {
            let raw = ocr.recognize(index, page, Some(d.bbox)).unwrap_or_else(|e| {
                warnings.push(format!("page {}: OCR failed for box {}: {e}", index + 1, d.bbox));
                String::new()
            });
            let lines = raw.lines().count();
            ReferenceString::new(raw, (0, lines))
        })
        .collect();
    timings.ocr += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let tagging = tagger.tag(&strings);
    warnings.extend(tagging.warnings);
    timings.segment += t.elapsed().as_secs_f64();

    let records = detections
        .iter()
        .zip(tagging.references)
        .map(|(d, tagged)| RefRecord {
            page: index as u32 + 1,
            bbox: Some(d.bbox),
            source: Source::LayoutOnly,
            detector: DetectorAttr::Layout,
            score: Some(d.score),
            tagged,
        })
        .collect();
    Ok(PageResult {
        records,
        warnings,
        timings,
    })
}

/// Detects references on every page and reads each box with `ocr`. Pages
/// run in parallel; records come back in page and reading order. An OCR
/// failure keeps the record with an empty raw string and adds a warning.
pub fn run_layout(
    pages: &[RasterImage],
    opts: &LayoutOptions,
    ocr: &dyn OcrEngine,
    tagger: &Tagger,
) -> Result<PipelineOutput, PipelineError> {
    if pages.is_empty() {
        return Err(PipelineError::InvalidInput("layout pipeline needs at least one page".into()));
    }
    opts.detector.validate()?;
    let results: Vec<PageResult> = pages
        .par_iter()
        .enumerate()
        .map(|(i, p)| run_page(i, p, opts, ocr, tagger))
        .collect::<Result<_, _>>()?;
    let mut out = PipelineOutput::default();
    for r in results {
        out.records.extend(r.records);
        out.warnings.extend(r.warnings);
        out.timings.add(&r.timings);
    }
    Ok(out)
}
