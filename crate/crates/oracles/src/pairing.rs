//! Ensemble pairing by exhaustive search over all one-to-one matchings.

use std::cmp::Ordering;
use std::collections::HashSet;

use refscan_core::pipelines::RefRecord;

/// Similarity as an exact fraction.
#[derive(Debug, Clone, Copy)]
pub struct Frac(pub u64, pub u64);

impl Frac {
    fn cmp(self, o: Frac) -> Ordering {
        (self.0 as u128 * o.1.max(1) as u128).cmp(&(o.0 as u128 * self.1.max(1) as u128))
    }

    pub fn value(self) -> f64 {
        if self.1 == 0 {
            0.0
        } else {
            self.0 as f64 / self.1 as f64
        }
    }
}

fn token_set(s: &str) -> HashSet<String> {
    let mut out = HashSet::new();
    let mut cur = String::new();
    for c in s.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.insert(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.insert(cur);
    }
    out
}

pub fn jaccard(a: &str, b: &str) -> Frac {
    let (a, b) = (token_set(a), token_set(b));
    let inter = a.iter().filter(|t| b.contains(*t)).count() as u64;
    Frac(inter, a.len() as u64 + b.len() as u64 - inter)
}

/// Edge weight of a candidate pair, `None` if the pair is not allowed:
/// Jaccard at least 3/5, or the text box lying at least 90 % inside the
/// layout box on the same page (weight raised to 3/5).
pub fn edge(l: &RefRecord, t: &RefRecord) -> Option<Frac> {
    let mut w = jaccard(l.raw(), t.raw());
    if let (Some(lb), Some(tb)) = (l.bbox, t.bbox) {
        if l.page == t.page && tb.w as u64 * tb.h as u64 > 0 {
            let ix = (lb.x + lb.w).min(tb.x + tb.w).saturating_sub(lb.x.max(tb.x)) as u64;
            let iy = (lb.y + lb.h).min(tb.y + tb.h).saturating_sub(lb.y.max(tb.y)) as u64;
            if ix * iy * 10 >= tb.w as u64 * tb.h as u64 * 9 && w.cmp(Frac(3, 5)) == Ordering::Less {
                w = Frac(3, 5);
            }
        }
    }
    (w.0 > 0 && w.cmp(Frac(3, 5)) != Ordering::Less).then_some(w)
}

/// Strict preference between edges: higher weight, then lower layout index,
/// then lower text index.
fn rank(a: (Frac, usize, usize), b: (Frac, usize, usize)) -> Ordering {
    b.0.cmp(a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

fn better(a: &[(Frac, usize, usize)], b: &[(Frac, usize, usize)]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match rank(*x, *y) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
    }
    a.len() > b.len()
}

/// One pair in a matching: similarity, left index, right index.
type Pair = (Frac, usize, usize);

fn search(
    i: usize,
    edges: &[Vec<(usize, Frac)>],
    used: &mut Vec<bool>,
    current: &mut Vec<Pair>,
    visit: &mut dyn FnMut(&[Pair]),
) {
    if i == edges.len() {
        visit(current);
        return;
    }
    search(i + 1, edges, used, current, visit);
    for &(j, w) in &edges[i] {
        if !used[j] {
            used[j] = true;
            current.push((w, i, j));
            search(i + 1, edges, used, current, visit);
            current.pop();
            used[j] = false;
        }
    }
}

#[derive(Debug, Clone)]
pub struct PairingOracle {
    /// The lexicographically best matching under the edge preference, as
    /// `(layout, text)` pairs sorted by preference.
    pub best: Vec<(usize, usize)>,
    /// Largest total similarity of any matching.
    pub max_total: f64,
    pub matchings: usize,
}

/// Enumerates every matching. Keep both sides small.
pub fn brute_force_pairing(layout: &[RefRecord], text: &[RefRecord]) -> PairingOracle {
    let edges: Vec<Vec<(usize, Frac)>> = layout
        .iter()
        .map(|l| text.iter().enumerate().filter_map(|(j, t)| edge(l, t).map(|w| (j, w))).collect())
        .collect();
    let mut best: Vec<(Frac, usize, usize)> = Vec::new();
    let mut max_total = 0.0f64;
    let mut matchings = 0;
    let mut used = vec![false; text.len()];
    search(0, &edges, &mut used, &mut Vec::new(), &mut |m| {
        matchings += 1;
        let mut sorted = m.to_vec();
        sorted.sort_by(|a, b| rank(*a, *b));
        if better(&sorted, &best) {
            best = sorted;
        }
        max_total = max_total.max(m.iter().map(|e| e.0.value()).sum());
    });
    PairingOracle {
        best: best.into_iter().map(|(_, i, j)| (i, j)).collect(),
        max_total,
        matchings,
    }
}
