//! Pairing layout and text records of the same document.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::{DetectorAttr, RefRecord, Source};

/// Exact token-Jaccard value `num / den`.
#[derive(Debug, Clone, Copy)]
pub struct Similarity {
    pub num: u64,
    pub den: u64,
}

impl Similarity {
    pub fn value(self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

impl PartialEq for Similarity {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Similarity {}

impl PartialOrd for Similarity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Similarity {
    fn cmp(&self, other: &Self) -> Ordering {
        // 0/0 counts as zero.
        let (a, b) = (self.num as u128 * other.den.max(1) as u128, other.num as u128 * self.den.max(1) as u128);
        a.cmp(&b)
    }
}

/// Minimum similarity for a pair.
pub const PAIRING_THRESHOLD: Similarity = Similarity { num: 3, den: 5 };

fn tokens(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Jaccard index of the lower-cased alphanumeric token sets.
pub fn token_jaccard(a: &str, b: &str) -> Similarity {
    let (a, b) = (tokens(a), tokens(b));
    let inter = a.intersection(&b).count() as u64;
    let union = (a.len() + b.len()) as u64 - inter;
    Similarity { num: inter, den: union }
}

/// Whether the text record's geometry falls inside the layout box (at least
/// 90 % of its area, same page).
fn contained(layout: &RefRecord, text: &RefRecord) -> bool {
    match (layout.bbox, text.bbox) {
        (Some(l), Some(t)) if layout.page == text.page && t.area() > 0 => {
            let inside = l.intersection(&t).map_or(0, |r| r.area());
            inside * 10 >= t.area() * 9
        }
        _ => false,
    }
}

/// Similarity of a candidate pair, or `None` when the records cannot pair.
/// Geometric containment lifts the similarity to the threshold.
pub(crate) fn pair_similarity(layout: &RefRecord, text: &RefRecord) -> Option<Similarity> {
    let s = token_jaccard(layout.raw(), text.raw());
    let s = if contained(layout, text) { s.max(PAIRING_THRESHOLD) } else { s };
    (s >= PAIRING_THRESHOLD && s.num > 0).then_some(s)
}

/// Greedy one-to-one pairing: candidates in order of decreasing similarity,
/// ties by layout index then text index; a candidate is taken when neither
/// record is paired yet. Returns `(layout index, text index)` pairs in the
/// order they were taken.
pub fn pair_records(layout: &[RefRecord], text: &[RefRecord]) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(Similarity, usize, usize)> = Vec::new();
    for (i, l) in layout.iter().enumerate() {
        for (j, t) in text.iter().enumerate() {
            if let Some(s) = pair_similarity(l, t) {
                candidates.push((s, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut layout_used = vec![false; layout.len()];
    let mut text_used = vec![false; text.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !layout_used[i] && !text_used[j] {
            layout_used[i] = true;
            text_used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

/// Merges layout and text records. A pair becomes one `both` record with
/// the layout box, page and score; its reference comes from the layout side
/// unless OCR left that empty. Unpaired records keep their own source.
/// Output: layout records in order (merged where paired), then the unpaired
/// text records in order.
pub fn ensemble_merge(layout: Vec<RefRecord>, text: Vec<RefRecord>) -> Vec<RefRecord> {
    let pairs = pair_records(&layout, &text);
    let mut partner = vec![None; layout.len()];
    let mut text_paired = vec![false; text.len()];
    for &(i, j) in &pairs {
        partner[i] = Some(j);
        text_paired[j] = true;
    }
    let mut out = Vec::with_capacity(layout.len() + text.len() - pairs.len());
    for (i, mut l) in layout.into_iter().enumerate() {
        l.source = Source::LayoutOnly;
        if let Some(j) = partner[i] {
            if l.raw().trim().is_empty() {
                l.tagged = text[j].tagged.clone();
            }
            l.source = Source::Both;
            l.detector = DetectorAttr::LayoutText;
        }
        out.push(l);
    }
    out.extend(
        text.into_iter()
            .zip(text_paired)
            .filter(|(_, paired)| !paired)
            .map(|(mut t, _)| {
                t.source = Source::TextOnly;
                t
            }),
    );
    out
}
