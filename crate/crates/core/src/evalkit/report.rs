use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub ap: f64,
    /// Matched ground truth over all ground truth at this threshold.
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_threshold: Vec<ThresholdMetrics>,
    pub ap50: f64,
    pub ap75: f64,
    /// Mean AP over all ten thresholds.
    pub map_coco: f64,
    /// Mean recall over all ten thresholds.
    pub ar: f64,
    pub pages: usize,
    pub ground_truth: usize,
    pub detections: usize,
}

pub const CSV_HEADER: &str = "mAP[0.5:0.95],AP50,AP75,AR";

fn at(per: &[ThresholdMetrics], t: f64) -> f64 {
    per.iter()
        .find(|m| m.threshold == t)
        .map_or(f64::NAN, |m| m.ap)
}

impl EvalReport {
    pub fn from_thresholds(
        per_threshold: Vec<ThresholdMetrics>,
        pages: usize,
        ground_truth: usize,
        detections: usize,
    ) -> Self {
        let n = per_threshold.len() as f64;
        Self {
            ap50: at(&per_threshold, 0.5),
            ap75: at(&per_threshold, 0.75),
            map_coco: per_threshold.iter().map(|m| m.ap).sum::<f64>() / n,
            ar: per_threshold.iter().map(|m| m.recall).sum::<f64>() / n,
            per_threshold,
            pages,
            ground_truth,
            detections,
        }
    }

    /// `(threshold, ap)` pairs in ascending threshold order.
    pub fn ap_per_threshold(&self) -> Vec<(f64, f64)> {
        self.per_threshold.iter().map(|m| (m.threshold, m.ap)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One CSV data row matching [`CSV_HEADER`], values in percent.
    pub fn csv_row(&self) -> String {
        format!(
            "{:.2},{:.2},{:.2},{:.2}",
            100.0 * self.map_coco,
            100.0 * self.ap50,
            100.0 * self.ap75,
            100.0 * self.ar
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}\n", self.csv_row())
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "pages: {}  ground truth: {}  detections: {}",
            self.pages, self.ground_truth, self.detections
        )?;
        writeln!(f, "{:>14} {:>8} {:>8} {:>8}", "mAP[0.5:0.95]", "AP50", "AP75", "AR")?;
        writeln!(
            f,
            "{:>14.2} {:>8.2} {:>8.2} {:>8.2}",
            100.0 * self.map_coco,
            100.0 * self.ap50,
            100.0 * self.ap75,
            100.0 * self.ar
        )?;
        writeln!(f)?;
        writeln!(f, "{:>6} {:>8} {:>8}", "IoU", "AP", "recall")?;
        for m in &self.per_threshold {
            writeln!(f, "{:>6.2} {:>8.4} {:>8.4}", m.threshold, m.ap, m.recall)?;
        }
        Ok(())
    }
}
