//! COCO-style evaluation computed the slow way: exact rational IoU tests,
//! explicit maximum search for every interpolated precision point.

use std::collections::BTreeMap;

use refscan_core::{Detection, RefBox};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMetrics {
    pub ap: [f64; 10],
    pub recall: [f64; 10],
    pub ap50: f64,
    pub ap75: f64,
    pub map: f64,
    pub ar: f64,
}

fn inter_union(a: &RefBox, b: &RefBox) -> (u64, u64) {
    let x0 = a.x.max(b.x) as u64;
    let y0 = a.y.max(b.y) as u64;
    let x1 = (a.x + a.w).min(b.x + b.w) as u64;
    let y1 = (a.y + a.h).min(b.y + b.h) as u64;
    let inter = if x1 > x0 && y1 > y0 { (x1 - x0) * (y1 - y0) } else { 0 };
    let union = a.w as u64 * a.h as u64 + b.w as u64 * b.h as u64 - inter;
    (inter, union)
}

/// IoU `>= percent / 100`, decided exactly.
fn passes(iu: (u64, u64), percent: u64) -> bool {
    iu.1 > 0 && iu.0 * 100 >= percent * iu.1
}

/// `a > b` for IoU fractions.
fn greater(a: (u64, u64), b: (u64, u64)) -> bool {
    a.0 as u128 * b.1 as u128 > b.0 as u128 * a.1 as u128
}

/// Per-page `(score, true positive)` list and matched ground-truth count.
fn page(dets: &[Detection], gts: &[RefBox], percent: u64) -> (Vec<(f64, bool)>, usize) {
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    // Insertion sort: descending score, stable.
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && dets[idx[j]].score > dets[idx[j - 1]].score {
            idx.swap(j, j - 1);
            j -= 1;
        }
    }
    idx.truncate(100);
    let mut taken = vec![false; gts.len()];
    let mut out = Vec::new();
    for &d in &idx {
        let mut best: Option<(usize, (u64, u64))> = None;
        for (g, gt) in gts.iter().enumerate() {
            let iu = inter_union(&dets[d].bbox, gt);
            if taken[g] || !passes(iu, percent) {
                continue;
            }
            match best {
                Some((_, b)) if !greater(iu, b) => {}
                _ => best = Some((g, iu)),
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
        }
        out.push((dets[d].score, best.is_some()));
    }
    (out, taken.iter().filter(|&&t| t).count())
}

fn interpolated(pooled: &[(f64, bool)], n_gt: usize) -> f64 {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && pooled[order[j]].0 > pooled[order[j - 1]].0 {
            order.swap(j, j - 1);
            j -= 1;
        }
    }
    let mut tp = Vec::new();
    let mut count = 0usize;
    for &o in &order {
        count += pooled[o].1 as usize;
        tp.push(count);
    }
    let mut sum = 0.0;
    for r in 0..=100usize {
        let best = (0..tp.len())
            .filter(|&k| tp[k] * 100 >= r * n_gt)
            .map(|k| tp[k] as f64 / (k + 1) as f64)
            .fold(0.0f64, f64::max);
        sum += best;
    }
    sum / 101.0
}

/// Requires at least one ground-truth box and no detection pages missing
/// from the ground truth.
pub fn brute_force_evaluate(
    dets: &BTreeMap<String, Vec<Detection>>,
    gts: &BTreeMap<String, Vec<RefBox>>,
) -> OracleMetrics {
    let n_gt: usize = gts.values().map(Vec::len).sum();
    assert!(n_gt > 0, "oracle needs ground truth");
    let mut ap = [0.0; 10];
    let mut recall = [0.0; 10];
    for i in 0..10 {
        let percent = 50 + 5 * i as u64;
        let mut pooled = Vec::new();
        let mut matched = 0;
        for (name, page_gts) in gts {
            let page_dets = dets.get(name).map(Vec::as_slice).unwrap_or(&[]);
            let (outcomes, m) = page(page_dets, page_gts, percent);
            pooled.extend(outcomes);
            matched += m;
        }
        ap[i] = interpolated(&pooled, n_gt);
        recall[i] = matched as f64 / n_gt as f64;
    }
    OracleMetrics {
        ap50: ap[0],
        ap75: ap[5],
        map: ap.iter().sum::<f64>() / 10.0,
        ar: recall.iter().sum::<f64>() / 10.0,
        ap,
        recall,
    }
}
