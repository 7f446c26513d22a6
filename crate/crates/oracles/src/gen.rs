//! Seeded random instances.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, RngCore};
use refscan_core::pipelines::{DetectorAttr, ExtractionResult, RefRecord, Source};
use refscan_core::textref::{Namer, TaggedReference};
use refscan_core::{BinaryImage, Detection, RefBox};

pub use rand_chacha::ChaCha8Rng as Rng8;
pub use rand::SeedableRng;

pub fn rng(seed: u64) -> Rng8 {
    Rng8::seed_from_u64(seed)
}

/// Binary image with the given foreground probability.
pub fn binary(rng: &mut impl Rng, w: u32, h: u32, density: f64) -> BinaryImage {
    let data = (0..w as usize * h as usize).map(|_| rng.random_bool(density)).collect();
    BinaryImage::new(w, h, data).unwrap()
}

/// Histograms of several shapes: few occupied bins, two modes, dense noise,
/// and very large counts.
pub fn histogram(rng: &mut impl Rng) -> [u64; 256] {
    let mut h = [0u64; 256];
    match rng.random_range(0..4) {
        0 => {
            for _ in 0..rng.random_range(1..=4) {
                h[rng.random_range(0..256)] += rng.random_range(1..50);
            }
        }
        1 => {
            let (a, b) = (rng.random_range(0..128), rng.random_range(128..256));
            for _ in 0..rng.random_range(10..2000) {
                let centre = if rng.random_bool(0.5) { a } else { b };
                let v = (centre + rng.random_range(-20..=20)).clamp(0, 255);
                h[v as usize] += 1;
            }
        }
        2 => {
            for c in h.iter_mut() {
                if rng.random_bool(0.6) {
                    *c = rng.random_range(0..10);
                }
            }
        }
        _ => {
            for _ in 0..rng.random_range(2..20) {
                h[rng.random_range(0..256)] += rng.random_range(1..1_000_000_000_000u64);
            }
        }
    }
    h
}

fn small_box(rng: &mut impl Rng) -> RefBox {
    RefBox::new(rng.random_range(0..20), rng.random_range(0..20), rng.random_range(1..10), rng.random_range(1..10))
}

/// Evaluation instance: up to `max_pages` pages with up to `max_boxes`
/// ground-truth boxes each (at least one box overall). Boxes live on a small
/// grid so IoU values often land exactly on thresholds; scores come from a
/// short list so ties are common. Some pages have no detection entry.
pub fn eval_instance(
    rng: &mut impl Rng,
    max_pages: usize,
    max_boxes: usize,
) -> (BTreeMap<String, Vec<Detection>>, BTreeMap<String, Vec<RefBox>>) {
    let pages = rng.random_range(1..=max_pages);
    let mut gts = BTreeMap::new();
    let mut dets = BTreeMap::new();
    for p in 0..pages {
        let name = format!("page-{p}");
        let n = rng.random_range(0..=max_boxes);
        let g: Vec<RefBox> = (0..n).map(|_| small_box(rng)).collect();
        let mut d = Vec::new();
        for b in &g {
            if rng.random_bool(0.7) {
                let jitter = |v: u32, rng: &mut dyn RngCore| (v as i64 + (rng.next_u32() % 5) as i64 - 2).max(0) as u32;
                let bb = RefBox::new(jitter(b.x, rng), jitter(b.y, rng), jitter(b.w, rng).max(1), jitter(b.h, rng).max(1));
                d.push(bb);
            }
        }
        for _ in 0..rng.random_range(0..=max_boxes / 2) {
            d.push(small_box(rng));
        }
        let scores = [0.1, 0.3, 0.5, 0.5, 0.75, 0.9, 0.95];
        let d: Vec<Detection> = d.into_iter().map(|b| Detection::new(b, *scores.choose(rng).unwrap())).collect();
        if !d.is_empty() || rng.random_bool(0.5) {
            dets.insert(name.clone(), d);
        }
        gts.insert(name, g);
    }
    if gts.values().all(Vec::is_empty) {
        gts.get_mut("page-0").unwrap().push(small_box(rng));
    }
    (dets, gts)
}

const WORDS: &[&str] = &["smith", "doe", "deep", "layout", "journal", "1999", "review", "neural", "page", "text", "ref", "model"];

fn sentence(rng: &mut impl Rng, len: usize) -> String {
    (0..len).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn record(page: u32, bbox: Option<RefBox>, source: Source, detector: DetectorAttr, raw: String) -> RefRecord {
    RefRecord {
        page,
        bbox,
        source,
        detector,
        score: None,
        tagged: TaggedReference::untagged(raw, Namer::ParscitLike),
    }
}

/// Layout and text records drawn from a small vocabulary, so token overlap
/// is frequent; some text records derive from layout ones and some carry
/// geometry for containment pairing.
pub fn ensemble_records(rng: &mut impl Rng, max_per_side: usize) -> (Vec<RefRecord>, Vec<RefRecord>) {
    let nl = rng.random_range(0..=max_per_side);
    let nt = rng.random_range(0..=max_per_side);
    let layout: Vec<RefRecord> = (0..nl)
        .map(|_| {
            let len = rng.random_range(0..6);
            record(rng.random_range(1..=2), Some(small_box(rng)), Source::LayoutOnly, DetectorAttr::Layout, sentence(rng, len))
        })
        .collect();
    let text = (0..nt)
        .map(|_| {
            let raw = match layout.choose(rng) {
                Some(l) if rng.random_bool(0.5) => {
                    let mut words: Vec<&str> = l.raw().split(' ').filter(|w| !w.is_empty()).collect();
                    if rng.random_bool(0.5) {
                        words.push(WORDS.choose(rng).unwrap());
                    }
                    words.join(" ").to_uppercase()
                }
                _ => {
                    let len = rng.random_range(0..6);
                    sentence(rng, len)
                }
            };
            let bbox = rng.random_bool(0.3).then(|| small_box(rng));
            record(rng.random_range(1..=2), bbox, Source::TextOnly, DetectorAttr::Text, raw)
        })
        .collect();
    (layout, text)
}

const CHARS: &[char] = &['a', 'Z', '0', ' ', ' ', '\n', '\r', '\t', '&', '<', '>', '"', '\'', ';', 'é', 'ß', '中', '😀', '.', ',', ']', '-'];

fn xml_string(rng: &mut impl Rng) -> String {
    let len = rng.random_range(0..24);
    (0..len).map(|_| *CHARS.choose(rng).unwrap()).collect()
}

/// Arbitrary result: random strings with markup-significant characters and
/// whitespace at the edges, optional fields, finite scores.
pub fn extraction_result(rng: &mut impl Rng) -> ExtractionResult {
    let pages = rng.random_range(0..5u32);
    let n = if pages == 0 { 0 } else { rng.random_range(0..8) };
    let records = (0..n)
        .map(|_| {
            let source = *[Source::LayoutOnly, Source::TextOnly, Source::Both].choose(rng).unwrap();
            let detector = *DetectorAttr::ALL.choose(rng).unwrap();
            let bbox = (source != Source::TextOnly || rng.random_bool(0.3)).then(|| {
                RefBox::new(rng.random_range(0..5000), rng.random_range(0..5000), rng.random_range(0..5000), rng.random_range(0..5000))
            });
            let namer = if rng.random_bool(0.5) {
                Namer::ParscitLike
            } else {
                Namer::External {
                    tool: ["grobid", "parscit", "tag-map", "a&b \"x\""].choose(rng).unwrap().to_string(),
                }
            };
            RefRecord {
                page: rng.random_range(1..=pages),
                bbox,
                source,
                detector,
                score: rng.random_bool(0.5).then(|| rng.random::<f64>() * if rng.random_bool(0.1) { 1e-300 } else { 1.0 }),
                tagged: TaggedReference {
                    raw: xml_string(rng),
                    authors: (0..rng.random_range(0..3)).map(|_| xml_string(rng)).collect(),
                    title: rng.random_bool(0.5).then(|| xml_string(rng)),
                    year: rng.random_bool(0.5).then(|| rng.random_range(-3000..3000)),
                    venue: rng.random_bool(0.5).then(|| xml_string(rng)),
                    namer,
                },
            }
        })
        .collect();
    ExtractionResult {
        pages,
        records,
        warnings: (0..rng.random_range(0..3)).map(|_| xml_string(rng)).collect(),
    }
}
