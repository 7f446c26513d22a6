//! Seeded synthetic bibliography pages.
//!
//! Text is drawn as solid glyph blocks on a monospace grid: capitals, digits
//! and ascenders reach the cap height, descenders drop below the baseline,
//! punctuation is narrow. That is enough structure for the layout detector
//! and keeps every ground-truth box exact.

use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnnotatedPage, DatasetError, DatasetManifest, Layout, RefBox, Split};
use crate::imgproc::{save_raster, RasterImage};

pub const PAGE_WIDTH: u32 = 1240;
pub const PAGE_HEIGHT: u32 = 1754;
const MARGIN_X: u32 = 90;
const MARGIN_Y: u32 = 100;
const GUTTER: u32 = 100;
const LINE_PITCH: u32 = 20;
const CAP_HEIGHT: u32 = 12;
const X_HEIGHT: u32 = 8;
const DESCENDER: u32 = 3;
const ADVANCE: u32 = 9;
const GLYPH_WIDTH: u32 = 7;
const HANGING_INDENT: u32 = 36;
const INK: u8 = 0;
const PAPER: u8 = 255;

/// Referencing style; decides labels, indentation and inter-reference spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefStyle {
    /// `[k] I. Surname, ...` with continuation lines aligned after the label
    /// and a gap between entries.
    Numbered,
    /// `Surname, I., & ... (year).` flush left, double spacing between entries.
    AuthorFirst,
    /// Flush first line, indented continuations, no extra spacing.
    HangingIndent,
}

impl RefStyle {
    pub const ALL: [RefStyle; 3] = [RefStyle::Numbered, RefStyle::AuthorFirst, RefStyle::HangingIndent];

    fn extra_gap(self) -> u32 {
        match self {
            RefStyle::Numbered => 16,
            RefStyle::AuthorFirst => LINE_PITCH,
            RefStyle::HangingIndent => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub layout: Layout,
    pub n_refs: usize,
    pub style: RefStyle,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
}

impl SynthSpec {
    pub fn new(layout: Layout, n_refs: usize, style: RefStyle, seed: u64) -> Self {
        Self {
            layout,
            n_refs,
            style,
            seed,
            width: PAGE_WIDTH,
            height: PAGE_HEIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthLine {
    pub reference: usize,
    pub column: usize,
    /// Tight ink box of the rendered line.
    pub bbox: RefBox,
    /// Left edge of the line's text slot relative to the column start.
    pub indent: u32,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct SynthPage {
    /// Grayscale page, black ink on white.
    pub image: RasterImage,
    pub page: AnnotatedPage,
    /// Reference strings, aligned with `page.boxes`.
    pub texts: Vec<String>,
    pub lines: Vec<SynthLine>,
    /// Half-open ink x-range `[start, end)` of each non-empty column.
    pub columns: Vec<(u32, u32)>,
    pub style: RefStyle,
}

impl SynthPage {
    /// Lines of one reference, joined with newlines.
    pub fn reference_lines(&self, reference: usize) -> Vec<&str> {
        self.lines
            .iter()
            .filter(|l| l.reference == reference)
            .map(|l| l.text.as_str())
            .collect()
    }

    /// Page text in reading order, one rendered line per text line. Hanging
    /// continuation lines keep their indentation, as a layout-preserving text
    /// extractor would.
    pub fn full_text(&self) -> String {
        let mut out = String::new();
        let mut prev = None;
        for line in &self.lines {
            let continues = prev == Some(line.reference);
            if prev.is_some() && !continues && self.style != RefStyle::HangingIndent {
                out.push('\n');
            }
            if continues && self.style == RefStyle::HangingIndent {
                out.push_str("    ");
            }
            out.push_str(&line.text);
            out.push('\n');
            prev = Some(line.reference);
        }
        out
    }
}

const SURNAMES: &[&str] = &[
    "Smith", "Müller", "Schmidt", "Ahmed", "Dengel", "Garcia", "Nguyen", "Weber", "Fischer",
    "Kumar", "Rossi", "Becker", "Hoffmann", "Tanaka", "Lopez", "Wagner", "Khan", "Meyer",
    "Zimmermann", "Novak", "Olsen", "Bauer", "Richter", "Klein",
];
const WORDS: &[&str] = &[
    "analysis", "social", "survey", "network", "learning", "deep", "document", "layout",
    "recognition", "structure", "political", "behaviour", "methods", "evidence", "migration",
    "labour", "market", "education", "inequality", "images", "detection", "theory",
    "empirical", "study", "regional", "public", "opinion", "data", "large", "scale",
    "model", "effects", "policy", "change", "urban", "family", "youth", "health",
];
const VENUES: &[&str] = &[
    "Journal of Social Research", "Pattern Recognition", "Sociological Review",
    "Document Analysis and Recognition", "European Sociological Review",
    "Zeitschrift für Soziologie", "Information Processing Letters", "Political Studies",
];

fn capitalized(word: &str) -> String {
    let mut c = word.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn initial(rng: &mut ChaCha8Rng) -> char {
    (b'A' + rng.random_range(0..26u8)) as char
}

fn reference_text(rng: &mut ChaCha8Rng, style: RefStyle, target_len: usize) -> String {
    let n_authors = rng.random_range(1..=4);
    let authors: Vec<(String, char)> = (0..n_authors)
        .map(|_| (SURNAMES.choose(rng).unwrap().to_string(), initial(rng)))
        .collect();
    let year = rng.random_range(1950..=2023);
    let venue = *VENUES.choose(rng).unwrap();
    let (vol, no) = (rng.random_range(1..80), rng.random_range(1..12));
    let p0 = rng.random_range(1..900);
    let p1 = p0 + rng.random_range(2..40);

    let author_block = match style {
        RefStyle::Numbered => authors
            .iter()
            .map(|(s, i)| format!("{i}. {s}"))
            .collect::<Vec<_>>()
            .join(", "),
        RefStyle::AuthorFirst => {
            let names: Vec<String> = authors.iter().map(|(s, i)| format!("{s}, {i}.")).collect();
            match names.split_last() {
                Some((last, rest)) if !rest.is_empty() => format!("{}, & {last}", rest.join(", ")),
                _ => names.join(""),
            }
        }
        RefStyle::HangingIndent => {
            let names: Vec<String> = authors.iter().map(|(s, i)| format!("{s}, {i}.")).collect();
            names.join(", ")
        }
    };
    let assemble = |title: &str| match style {
        RefStyle::Numbered => {
            format!("{author_block}. {title}. {venue}, {vol}({no}):{p0}-{p1}, {year}.")
        }
        RefStyle::AuthorFirst => {
            format!("{author_block} ({year}). {title}. {venue}, {vol}({no}), {p0}-{p1}.")
        }
        RefStyle::HangingIndent => {
            format!("{author_block} {year}. {title}. {venue} {vol} ({no}): {p0}-{p1}.")
        }
    };
    let mut title_words = vec![capitalized(WORDS.choose(rng).unwrap())];
    loop {
        let text = assemble(&title_words.join(" "));
        if text.chars().count() >= target_len || title_words.len() >= 80 {
            return text;
        }
        title_words.push(WORDS.choose(rng).unwrap().to_string());
    }
}

/// Horizontal metrics and vertical extent (relative to the baseline) of a
/// character's ink block. `None` extent means no ink.
fn glyph(c: char) -> (u32, u32, Option<(i32, i32)>) {
    let cap = -(CAP_HEIGHT as i32);
    let xh = -(X_HEIGHT as i32);
    let desc = DESCENDER as i32;
    match c {
        ' ' => (ADVANCE, 0, None),
        '.' => (5, 2, Some((-2, 0))),
        ',' | ';' => (5, 2, Some((-2, desc))),
        ':' => (5, 2, Some((xh, 0))),
        '(' | ')' | '[' | ']' => (5, 3, Some((cap, desc))),
        '-' => (ADVANCE, 5, Some((-5, -3))),
        'm' | 'w' => (ADVANCE + 2, GLYPH_WIDTH + 2, Some((xh, 0))),
        'M' | 'W' => (ADVANCE + 2, GLYPH_WIDTH + 2, Some((cap, 0))),
        'g' | 'j' | 'p' | 'q' | 'y' => (ADVANCE, GLYPH_WIDTH, Some((xh, desc))),
        'b' | 'd' | 'f' | 'h' | 'k' | 'l' | 't' | 'i' => (ADVANCE, GLYPH_WIDTH, Some((cap, 0))),
        c if c.is_uppercase() || c.is_ascii_digit() || c == '&' || !c.is_alphabetic() => {
            (ADVANCE, GLYPH_WIDTH, Some((cap, 0)))
        }
        _ => (ADVANCE, GLYPH_WIDTH, Some((xh, 0))),
    }
}

fn text_width(text: &str) -> u32 {
    text.chars().map(|c| glyph(c).0).sum()
}

/// Greedy word wrap; the first line may have a different width than the rest.
fn wrap(text: &str, first_width: u32, rest_width: u32) -> Vec<String> {
    let mut lines: Vec<String> = Vec::new();
    let mut current = String::new();
    for word in text.split_whitespace() {
        let limit = if lines.is_empty() { first_width } else { rest_width };
        let candidate = if current.is_empty() {
            word.to_string()
        } else {
            format!("{current} {word}")
        };
        if text_width(&candidate) <= limit || current.is_empty() {
            current = candidate;
        } else {
            lines.push(std::mem::replace(&mut current, word.to_string()));
        }
    }
    if !current.is_empty() {
        lines.push(current);
    }
    lines
}

/// Paints `text` with its left edge at `x` and returns the tight ink box.
fn draw_text(img: &mut RasterImage, x: u32, baseline: u32, text: &str) -> Option<RefBox> {
    let mut pen = x;
    let mut ink: Option<RefBox> = None;
    for c in text.chars() {
        let (advance, width, extent) = glyph(c);
        if let Some((top, bottom)) = extent {
            let y0 = (baseline as i32 + top) as u32;
            let y1 = (baseline as i32 + bottom) as u32;
            let x1 = (pen + width).min(img.width());
            for y in y0..y1.min(img.height()) {
                for xx in pen..x1 {
                    img.set_pixel(xx, y, &[INK]);
                }
            }
            let b = RefBox::from_corners(pen, y0, x1, y1);
            ink = Some(ink.map_or(b, |i| i.union(&b)));
        }
        pen += advance;
    }
    ink
}

struct Placement {
    texts: Vec<String>,
    labels: Vec<Option<String>>,
}

fn compose_texts(spec: &SynthSpec, capacity_px: u32, rng: &mut ChaCha8Rng) -> Placement {
    let cap_chars = (capacity_px / ADVANCE).max(8) as f64;
    let mut texts = Vec::with_capacity(spec.n_refs);
    let mut labels = Vec::with_capacity(spec.n_refs);
    for k in 0..spec.n_refs {
        let target = (cap_chars * rng.random_range(1.2..3.5)).round() as usize;
        let body = reference_text(rng, spec.style, target);
        if spec.style == RefStyle::Numbered {
            labels.push(Some(format!("[{}]", k + 1)));
        } else {
            labels.push(None);
        }
        texts.push(body);
    }
    Placement { texts, labels }
}

pub fn synth_page(spec: &SynthSpec) -> Result<SynthPage, DatasetError> {
    if spec.n_refs == 0 {
        return Err(DatasetError::InvalidSpec("n_refs must be at least 1".into()));
    }
    let cols = spec.layout.columns();
    let content_width = spec
        .width
        .checked_sub(2 * MARGIN_X + (cols - 1) * GUTTER)
        .filter(|w| *w / cols >= 20 * ADVANCE)
        .ok_or_else(|| DatasetError::InvalidSpec(format!("page width {} too small", spec.width)))?;
    let col_width = content_width / cols;
    if spec.height < 2 * MARGIN_Y + LINE_PITCH {
        return Err(DatasetError::InvalidSpec(format!("page height {} too small", spec.height)));
    }
    let bottom_limit = spec.height - MARGIN_Y;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let placement = compose_texts(spec, col_width, &mut rng);
    let label_indent = match spec.style {
        RefStyle::Numbered => text_width(&format!("[{}] ", spec.n_refs)),
        RefStyle::HangingIndent => HANGING_INDENT,
        RefStyle::AuthorFirst => 0,
    };

    let mut image = RasterImage::filled(spec.width, spec.height, PAPER)?;
    let mut boxes = Vec::with_capacity(spec.n_refs);
    let mut lines = Vec::new();
    let mut column = 0u32;
    let mut baseline = MARGIN_Y + CAP_HEIGHT;
    let mut col_ink: Vec<Option<(u32, u32)>> = vec![None; cols as usize];

    for (k, (body, label)) in placement.texts.iter().zip(&placement.labels).enumerate() {
        let wrapped = match spec.style {
            RefStyle::Numbered => wrap(body, col_width - label_indent, col_width - label_indent),
            RefStyle::HangingIndent => wrap(body, col_width, col_width - label_indent),
            RefStyle::AuthorFirst => wrap(body, col_width, col_width),
        };
        let height_needed = (wrapped.len() as u32 - 1) * LINE_PITCH + DESCENDER;
        if baseline + height_needed > bottom_limit {
            column += 1;
            baseline = MARGIN_Y + CAP_HEIGHT;
            if column >= cols || baseline + height_needed > bottom_limit {
                return Err(DatasetError::DoesNotFit(spec.n_refs));
            }
        }
        let col_x = MARGIN_X + column * (col_width + GUTTER);
        let mut ref_box: Option<RefBox> = None;
        for (i, text) in wrapped.iter().enumerate() {
            let (indent, line_text) = match (spec.style, i) {
                (RefStyle::Numbered, 0) => (0, format!("{} {text}", label.as_deref().unwrap_or(""))),
                (RefStyle::Numbered, _) | (RefStyle::HangingIndent, 1..) => (label_indent, text.clone()),
                _ => (0, text.clone()),
            };
            // The label is drawn flush; the text after it lands on the hanging
            // column used by continuation lines.
            let ink = if let (RefStyle::Numbered, 0) = (spec.style, i) {
                let label = label.as_deref().unwrap_or("");
                let a = draw_text(&mut image, col_x, baseline, label);
                let b = draw_text(&mut image, col_x + label_indent, baseline, text);
                match (a, b) {
                    (Some(a), Some(b)) => Some(a.union(&b)),
                    (a, b) => a.or(b),
                }
            } else {
                draw_text(&mut image, col_x + indent, baseline, &line_text)
            };
            if let Some(ink) = ink {
                ref_box = Some(ref_box.map_or(ink, |r| r.union(&ink)));
                let slot = &mut col_ink[column as usize];
                *slot = Some(slot.map_or((ink.x, ink.right()), |(a, b)| {
                    (a.min(ink.x), b.max(ink.right()))
                }));
                lines.push(SynthLine {
                    reference: k,
                    column: column as usize,
                    bbox: ink,
                    indent,
                    text: line_text,
                });
            }
            baseline += LINE_PITCH;
        }
        boxes.push(ref_box.expect("references always contain ink"));
        baseline += spec.style.extra_gap();
    }

    let page = AnnotatedPage {
        image_path: PathBuf::from(format!(
            "synth-{}-{}-{}.png",
            spec.layout.columns(),
            spec.n_refs,
            spec.seed
        )),
        width: spec.width,
        height: spec.height,
        boxes,
        layout: spec.layout,
    };
    let texts = placement
        .texts
        .iter()
        .zip(&placement.labels)
        .map(|(t, l)| match l {
            Some(l) => format!("{l} {t}"),
            None => t.clone(),
        })
        .collect();
    Ok(SynthPage {
        image,
        page,
        texts,
        lines,
        columns: col_ink.into_iter().flatten().collect(),
        style: spec.style,
    })
}

/// Renders `spec`, lowering `n_refs` until the references fit on the page.
pub fn synth_fitting_page(spec: &SynthSpec) -> Result<SynthPage, DatasetError> {
    let mut spec = spec.clone();
    loop {
        match synth_page(&spec) {
            Err(DatasetError::DoesNotFit(n)) if n > 1 => spec.n_refs = n - 1,
            other => return other,
        }
    }
}

/// A generated dataset held in memory; `write` materializes it on disk.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub manifest: DatasetManifest,
    /// Pages in manifest order (train, validation, test).
    pub pages: Vec<SynthPage>,
}

impl SynthDataset {
    /// Writes every page image and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, DatasetError> {
        std::fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        for p in &self.pages {
            save_raster(&p.image, &dir.join(&p.page.image_path))?;
        }
        let path = dir.join("manifest.json");
        super::save_manifest(&self.manifest, &path)?;
        Ok(path)
    }
}

/// Generates `pages` pages cycling through `layouts`, with random styles and
/// reference counts, split 70/10/20 into train/validation/test by index.
pub fn synth_dataset(
    name: &str,
    pages: usize,
    layouts: &[Layout],
    seed: u64,
) -> Result<SynthDataset, DatasetError> {
    if layouts.is_empty() {
        return Err(DatasetError::InvalidSpec("at least one layout is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = DatasetManifest::new(name);
    let mut generated = Vec::with_capacity(pages);
    for i in 0..pages {
        let layout = layouts[i % layouts.len()];
        let style = *RefStyle::ALL.choose(&mut rng).unwrap();
        let n_refs = rng.random_range(4..=18) * layout.columns() as usize;
        let mut spec = SynthSpec::new(layout, n_refs, style, rng.random());
        spec.seed ^= i as u64;
        let mut page = synth_fitting_page(&spec)?;
        page.page.image_path = PathBuf::from(format!("page-{i:05}.png"));
        let split = match i % 10 {
            0..=6 => Split::Train,
            7 => Split::Validation,
            _ => Split::Test,
        };
        manifest.splits.get_mut(split).push(page.page.clone());
        generated.push((split, page));
    }
    generated.sort_by_key(|(s, _)| *s);
    Ok(SynthDataset {
        manifest,
        pages: generated.into_iter().map(|(_, p)| p).collect(),
    })
}
