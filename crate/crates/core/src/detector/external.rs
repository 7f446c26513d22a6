//! JSON-lines exchange format for detections.
//!
//! One record per line: `{"page_id": "...", "x": 0, "y": 0, "w": 10, "h": 10,
//! "score": 0.9}`. Neural detectors write this format; native detections are
//! saved in it too, so both sources share one loader.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DetectError, Detection};
use crate::dataset::RefBox;
use crate::evalkit::iou;

/// Overlap above which a lower-scored external detection is suppressed.
pub const NMS_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalRecord {
    pub page_id: String,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub score: f64,
}

impl ExternalRecord {
    fn detection(&self) -> Detection {
        Detection::new(RefBox::new(self.x, self.y, self.w, self.h), self.score)
    }
}

/// Parses and validates every record. `bounds` maps page ids to page sizes
/// for the pages whose boxes should be bounds-checked.
pub fn parse_external(
    text: &str,
    bounds: &BTreeMap<String, (u32, u32)>,
) -> Result<Vec<ExternalRecord>, DetectError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: ExternalRecord = serde_json::from_str(raw).map_err(|e| DetectError::Parse {
            line,
            detail: e.to_string(),
        })?;
        if !(0.0..=1.0).contains(&rec.score) {
            return Err(DetectError::Score {
                line,
                score: rec.score,
            });
        }
        let bbox = RefBox::new(rec.x, rec.y, rec.w, rec.h);
        if bbox.is_empty() {
            return Err(DetectError::Parse {
                line,
                detail: format!("box {bbox} has zero width or height"),
            });
        }
        if let Some(&(width, height)) = bounds.get(&rec.page_id) {
            if !bbox.fits_within(width, height) {
                return Err(DetectError::OutOfBounds {
                    line,
                    bbox,
                    width,
                    height,
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Greedy NMS: visits detections by descending score (stable) and drops any
/// whose IoU with an already kept one exceeds `threshold`.
pub fn non_max_suppression(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept: Vec<Detection> = Vec::new();
    for d in order {
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= threshold) {
            kept.push(*d);
        }
    }
    kept
}

fn read(path: &Path) -> Result<String, DetectError> {
    std::fs::read_to_string(path).map_err(|source| DetectError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads one page's detections after validation and NMS, sorted by
/// descending score. An empty file yields no detections; a non-empty file
/// without records for `page_id` is an error. `page_size` enables the bounds
/// check.
pub fn load_external_detections(
    path: &Path,
    page_id: &str,
    page_size: Option<(u32, u32)>,
) -> Result<Vec<Detection>, DetectError> {
    let bounds = page_size
        .map(|s| BTreeMap::from([(page_id.to_string(), s)]))
        .unwrap_or_default();
    let records = parse_external(&read(path)?, &bounds)?;
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let dets: Vec<Detection> = records
        .iter()
        .filter(|r| r.page_id == page_id)
        .map(ExternalRecord::detection)
        .collect();
    if dets.is_empty() {
        return Err(DetectError::UnknownPage(page_id.to_string()));
    }
    Ok(non_max_suppression(&dets, NMS_IOU))
}

/// Loads every page in the file, applying NMS per page.
pub fn load_external_all(
    path: &Path,
    bounds: &BTreeMap<String, (u32, u32)>,
) -> Result<BTreeMap<String, Vec<Detection>>, DetectError> {
    let mut by_page: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for rec in parse_external(&read(path)?, bounds)? {
        by_page.entry(rec.page_id.clone()).or_default().push(rec.detection());
    }
    for dets in by_page.values_mut() {
        *dets = non_max_suppression(dets, NMS_IOU);
    }
    Ok(by_page)
}

/// Writes detections of one page as JSON lines.
pub fn write_detections(
    out: &mut impl Write,
    page_id: &str,
    dets: &[Detection],
) -> std::io::Result<()> {
    for d in dets {
        let rec = ExternalRecord {
            page_id: page_id.to_string(),
            x: d.bbox.x,
            y: d.bbox.y,
            w: d.bbox.w,
            h: d.bbox.h,
            score: d.score,
        };
        serde_json::to_writer(&mut *out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_detections(path: &Path, page_id: &str, dets: &[Detection]) -> Result<(), DetectError> {
    let io_err = |source| DetectError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf = Vec::new();
    write_detections(&mut buf, page_id, dets).map_err(io_err)?;
    std::fs::write(path, buf).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        std::fs::write(&p, text).unwrap();
        (dir, p)
    }

    #[test]
    fn empty_file_is_empty() {
        let (_d, p) = write("");
        assert!(load_external_detections(&p, "a", None).unwrap().is_empty());
    }

    #[test]
    fn score_out_of_range_names_record() {
        let (_d, p) = write(
            "{\"page_id\":\"a\",\"x\":0,\"y\":0,\"w\":5,\"h\":5,\"score\":0.5}\n\
             {\"page_id\":\"a\",\"x\":0,\"y\":0,\"w\":5,\"h\":5,\"score\":1.2}\n",
        );
        match load_external_detections(&p, "a", None) {
            Err(DetectError::Score { line: 2, score }) => assert_eq!(score, 1.2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_page_and_bounds() {
        let (_d, p) = write("{\"page_id\":\"a\",\"x\":0,\"y\":0,\"w\":5,\"h\":5,\"score\":0.5}\n");
        assert!(matches!(
            load_external_detections(&p, "b", None),
            Err(DetectError::UnknownPage(_))
        ));
        assert!(matches!(
            load_external_detections(&p, "a", Some((4, 4))),
            Err(DetectError::OutOfBounds { line: 1, .. })
        ));
    }

    #[test]
    fn nms_keeps_highest() {
        let dets = [
            Detection::new(RefBox::new(0, 0, 10, 10), 0.6),
            Detection::new(RefBox::new(1, 0, 10, 10), 0.9),
            Detection::new(RefBox::new(50, 0, 10, 10), 0.3),
        ];
        let kept = non_max_suppression(&dets, NMS_IOU);
        assert_eq!(kept, vec![dets[1], dets[2]]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let dets = vec![
            Detection::new(RefBox::new(3, 4, 20, 7), 0.95),
            Detection::new(RefBox::new(3, 40, 20, 7), 0.1 + 0.2),
        ];
        save_detections(&p, "page-1", &dets).unwrap();
        assert_eq!(load_external_detections(&p, "page-1", None).unwrap(), dets);
    }
}
