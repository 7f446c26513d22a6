//! Detector evaluation under each pre-processing mode.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{evaluate, report::CSV_HEADER, EvalError, EvalReport};
use crate::dataset::{DatasetManifest, RefBox, Split};
use crate::detector::{detect, Detection, DetectorConfig};
use crate::imgproc::{compose_hybrid, load_raster, PreprocessMode, RasterImage};

#[derive(Debug, Clone)]
pub struct AblationPage {
    pub id: String,
    pub image: RasterImage,
    pub ground_truth: Vec<RefBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub mode: PreprocessMode,
    pub label: &'static str,
    pub report: EvalReport,
}

/// One row per requested mode, in request order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("Pre-processing,{CSV_HEADER}\n");
        for row in &self.rows {
            out.push_str(&format!("{},{}\n", row.label, row.report.csv_row()));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

impl fmt::Display for AblationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<32} {:>14} {:>8} {:>8} {:>8}",
            "Pre-processing", "mAP[0.5:0.95]", "AP50", "AP75", "AR"
        )?;
        for row in &self.rows {
            let r = &row.report;
            writeln!(
                f,
                "{:<32} {:>14.2} {:>8.2} {:>8.2} {:>8.2}",
                row.label,
                100.0 * r.map_coco,
                100.0 * r.ap50,
                100.0 * r.ap75,
                100.0 * r.ar
            )?;
        }
        Ok(())
    }
}

type PageRun = (String, Vec<RefBox>, Vec<Vec<Detection>>);

fn run_pages<F>(
    n: usize,
    load: F,
    modes: &[PreprocessMode],
    cfg: &DetectorConfig,
) -> Result<AblationTable, EvalError>
where
    F: Fn(usize) -> Result<(String, RasterImage, Vec<RefBox>), EvalError> + Sync,
{
    cfg.validate()?;
    let per_page: Vec<PageRun> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (id, image, gts) = load(i)?;
            let dets = modes
                .iter()
                .map(|&mode| Ok(detect(&compose_hybrid(&image, mode)?, cfg)?))
                .collect::<Result<Vec<_>, EvalError>>()?;
            Ok((id, gts, dets))
        })
        .collect::<Result<_, EvalError>>()?;

    let gts: BTreeMap<String, Vec<RefBox>> = per_page
        .iter()
        .map(|(id, g, _)| (id.clone(), g.clone()))
        .collect();
    let rows = modes
        .iter()
        .enumerate()
        .map(|(m, &mode)| {
            let dets: BTreeMap<String, Vec<Detection>> = per_page
                .iter()
                .map(|(id, _, d)| (id.clone(), d[m].clone()))
                .collect();
            Ok(AblationRow {
                mode,
                label: mode.label(),
                report: evaluate(&dets, &gts)?,
            })
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(AblationTable { rows })
}

/// Evaluates the detector on in-memory pages under each mode.
pub fn ablation_run(
    pages: &[AblationPage],
    modes: &[PreprocessMode],
    cfg: &DetectorConfig,
) -> Result<AblationTable, EvalError> {
    run_pages(
        pages.len(),
        |i| {
            let p = &pages[i];
            Ok((p.id.clone(), p.image.clone(), p.ground_truth.clone()))
        },
        modes,
        cfg,
    )
}

/// Evaluates the detector on a manifest's pages (one split, or all when
/// `split` is `None`); images resolve relative to `root`.
pub fn ablation_run_manifest(
    manifest: &DatasetManifest,
    root: &Path,
    split: Option<Split>,
    modes: &[PreprocessMode],
    cfg: &DetectorConfig,
) -> Result<AblationTable, EvalError> {
    let pages: Vec<_> = manifest
        .splits
        .iter()
        .filter(|(s, _)| split.is_none_or(|want| want == *s))
        .map(|(_, p)| p)
        .collect();
    run_pages(
        pages.len(),
        |i| {
            let p = pages[i];
            let image = load_raster(&root.join(&p.image_path))?;
            Ok((p.page_id(), image, p.boxes.clone()))
        },
        modes,
        cfg,
    )
}
