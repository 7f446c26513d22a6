//! COCO-style box evaluation: IoU, greedy matching, 101-point interpolated
//! AP over the 0.50:0.05:0.95 threshold sweep, and recall under a
//! 100-detections-per-page cap.
//!
//! A detection matches at threshold `t` when its IoU is `>= t` (the COCO
//! convention).

mod ablation;
mod report;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dataset::{DatasetError, RefBox};
use crate::detector::{DetectError, Detection};

pub use ablation::{ablation_run, ablation_run_manifest, AblationPage, AblationRow, AblationTable};
pub use report::{EvalReport, ThresholdMetrics};

/// Detections considered per page, highest scores first.
pub const MAX_DETECTIONS_PER_PAGE: usize = 100;
pub const RECALL_POINTS: usize = 101;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("detections reference pages missing from the ground truth: {}", .0.join(", "))]
    UnknownPages(Vec<String>),
    #[error("average precision is undefined without ground-truth boxes ({detections} detections)")]
    Undefined { detections: usize },
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Image(#[from] crate::imgproc::ImageError),
}

/// The ten IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

pub fn iou(a: &RefBox, b: &RefBox) -> f64 {
    let inter = a.intersection(b).map_or(0, |r| r.area());
    let union = a.area() + b.area() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetMatch {
    pub matched_gt: Option<usize>,
    /// IoU with the matched box, 0 when unmatched.
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Indexed like the input detections.
    pub detections: Vec<DetMatch>,
    pub gt_matched: Vec<bool>,
    /// Input indices in the order they were matched (descending score,
    /// stable).
    pub order: Vec<usize>,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.detections.iter().filter(|d| d.matched_gt.is_some()).count()
    }
}

fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    order
}

/// Greedy matching: detections in descending score order each take the
/// unmatched ground-truth box of highest IoU `>= t`, lower index on ties.
pub fn match_at_threshold(dets: &[Detection], gts: &[RefBox], t: f64) -> MatchResult {
    let order = score_order(dets);
    let mut gt_matched = vec![false; gts.len()];
    let mut detections = vec![
        DetMatch {
            matched_gt: None,
            iou: 0.0
        };
        dets.len()
    ];
    for &d in &order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_matched[g] {
                continue;
            }
            let v = iou(&dets[d].bbox, gt);
            if v >= t && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, v)) = best {
            gt_matched[g] = true;
            detections[d] = DetMatch {
                matched_gt: Some(g),
                iou: v,
            };
        }
    }
    MatchResult {
        detections,
        gt_matched,
        order,
    }
}

/// Average precision, or the number of detections when there is nothing to
/// recall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ap {
    Defined(f64),
    Undefined { detections: usize },
}

impl Ap {
    pub fn value(self) -> Option<f64> {
        match self {
            Ap::Defined(v) => Some(v),
            Ap::Undefined { .. } => None,
        }
    }
}

/// Matched detections of one page at one threshold, after the per-page cap.
fn page_outcomes(dets: &[Detection], gts: &[RefBox], t: f64) -> (Vec<(f64, bool)>, usize) {
    let order = score_order(dets);
    let capped: Vec<Detection> = order
        .iter()
        .take(MAX_DETECTIONS_PER_PAGE)
        .map(|&i| dets[i])
        .collect();
    let m = match_at_threshold(&capped, gts, t);
    let outcomes = m
        .order
        .iter()
        .map(|&i| (capped[i].score, m.detections[i].matched_gt.is_some()))
        .collect();
    (outcomes, m.gt_matched.iter().filter(|&&b| b).count())
}

/// 101-point interpolated AP from pooled `(score, is_true_positive)` pairs.
/// The pairs are stably sorted by descending score, so ties keep the given
/// order.
fn interpolated_ap(mut outcomes: Vec<(f64, bool)>, n_gt: usize) -> f64 {
    outcomes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut precision = Vec::with_capacity(outcomes.len());
    let mut tp_counts = Vec::with_capacity(outcomes.len());
    let mut tp = 0usize;
    for (k, &(_, hit)) in outcomes.iter().enumerate() {
        tp += hit as usize;
        precision.push(tp as f64 / (k + 1) as f64);
        tp_counts.push(tp);
    }
    // Envelope: best precision at this or any later cutoff.
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut sum = 0.0;
    let mut k = 0;
    for i in 0..RECALL_POINTS {
        // Recall i/100 compared exactly: tp / n_gt >= i / 100.
        while k < tp_counts.len() && tp_counts[k] * 100 < i * n_gt {
            k += 1;
        }
        if k == tp_counts.len() {
            break;
        }
        sum += precision[k];
    }
    sum / RECALL_POINTS as f64
}

/// AP of a single page at threshold `t`.
pub fn average_precision(dets: &[Detection], gts: &[RefBox], t: f64) -> Ap {
    if gts.is_empty() {
        return Ap::Undefined {
            detections: dets.len(),
        };
    }
    let (outcomes, _) = page_outcomes(dets, gts, t);
    Ap::Defined(interpolated_ap(outcomes, gts.len()))
}

/// Pools all pages and computes the full report. Pages present in the
/// ground truth but absent from `dets` count as pages without detections.
pub fn evaluate(
    dets: &BTreeMap<String, Vec<Detection>>,
    gts: &BTreeMap<String, Vec<RefBox>>,
) -> Result<EvalReport, EvalError> {
    let unknown: Vec<String> = dets.keys().filter(|k| !gts.contains_key(*k)).cloned().collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownPages(unknown));
    }
    let n_gt: usize = gts.values().map(Vec::len).sum();
    let n_dets: usize = dets.values().map(Vec::len).sum();
    if n_gt == 0 {
        return Err(EvalError::Undefined { detections: n_dets });
    }
    let empty = Vec::new();
    let per_threshold = iou_thresholds()
        .into_iter()
        .map(|t| {
            let mut pooled = Vec::new();
            let mut matched = 0;
            for (page, page_gts) in gts {
                let (outcomes, m) = page_outcomes(dets.get(page).unwrap_or(&empty), page_gts, t);
                pooled.extend(outcomes);
                matched += m;
            }
            ThresholdMetrics {
                threshold: t,
                ap: interpolated_ap(pooled, n_gt),
                recall: matched as f64 / n_gt as f64,
            }
        })
        .collect();
    Ok(EvalReport::from_thresholds(per_threshold, gts.len(), n_gt, n_dets))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: u32, y: u32, w: u32, h: u32, s: f64) -> Detection {
        Detection::new(RefBox::new(x, y, w, h), s)
    }

    #[test]
    fn iou_examples() {
        let a = RefBox::new(0, 0, 10, 10);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &RefBox::new(20, 20, 5, 5)), 0.0);
        assert_eq!(iou(&a, &RefBox::new(5, 0, 10, 10)), 50.0 / 150.0);
    }

    #[test]
    fn thresholds() {
        let t = iou_thresholds();
        assert_eq!(t[0], 0.5);
        assert_eq!(t[5], 0.75);
        assert_eq!(t[9], 0.95);
    }

    #[test]
    fn matching_respects_threshold() {
        // IoU 0.6: 60/100 overlap area.
        let gt = [RefBox::new(0, 0, 10, 10)];
        let d = [det(0, 0, 10, 6, 0.9)];
        assert_eq!(match_at_threshold(&d, &gt, 0.5).true_positives(), 1);
        assert_eq!(match_at_threshold(&d, &gt, 0.75).true_positives(), 0);
    }

    #[test]
    fn higher_score_wins() {
        let gt = [RefBox::new(0, 0, 10, 10)];
        let d = [det(0, 0, 10, 9, 0.8), det(0, 0, 10, 8, 0.9)];
        let m = match_at_threshold(&d, &gt, 0.5);
        assert_eq!(m.detections[1].matched_gt, Some(0));
        assert_eq!(m.detections[0].matched_gt, None);
    }

    #[test]
    fn ap_examples() {
        let gt = [RefBox::new(0, 0, 10, 10)];
        assert_eq!(average_precision(&[det(0, 0, 10, 10, 1.0)], &gt, 0.5), Ap::Defined(1.0));
        assert_eq!(average_precision(&[], &gt, 0.5), Ap::Defined(0.0));
        let tp_then_fp = [det(0, 0, 10, 10, 0.9), det(50, 50, 5, 5, 0.8)];
        assert_eq!(average_precision(&tp_then_fp, &gt, 0.5), Ap::Defined(1.0));
        assert_eq!(
            average_precision(&tp_then_fp, &[], 0.5),
            Ap::Undefined { detections: 2 }
        );
    }

    #[test]
    fn gt_as_detections_is_perfect() {
        let gts = BTreeMap::from([
            ("a".to_string(), vec![RefBox::new(0, 0, 4, 4), RefBox::new(5, 5, 4, 4)]),
            ("b".to_string(), vec![RefBox::new(1, 1, 3, 9)]),
        ]);
        let dets = gts
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().map(|b| Detection::new(*b, 1.0)).collect()))
            .collect();
        let r = evaluate(&dets, &gts).unwrap();
        assert_eq!((r.ap50, r.ap75, r.map_coco, r.ar), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn unknown_page_and_empty_gt() {
        let gts = BTreeMap::from([("a".to_string(), vec![])]);
        let dets = BTreeMap::from([("z".to_string(), vec![det(0, 0, 1, 1, 0.5)])]);
        assert!(matches!(evaluate(&dets, &gts), Err(EvalError::UnknownPages(p)) if p == ["z"]));
        assert!(matches!(
            evaluate(&BTreeMap::new(), &gts),
            Err(EvalError::Undefined { detections: 0 })
        ));
    }
}
