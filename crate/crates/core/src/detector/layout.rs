//! Columns, lines and reference groups on a binarized page.

use serde::{Deserialize, Serialize};

use super::{Detection, DetectorConfig, SCORE_BOTH_CUES, SCORE_FALLBACK, SCORE_ONE_CUE};
use crate::dataset::RefBox;
use crate::imgproc::{dilate, BinaryImage, DEFAULT_KERNEL_HEIGHT, DEFAULT_KERNEL_WIDTH};

const FALLBACK_MERGE_GAP: u32 = 16;
const MIN_MERGE_GAP: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineBlock {
    #[serde(rename = "box")]
    pub bbox: RefBox,
    pub baseline_y: u32,
    /// Offset of the line's left edge from its column start.
    pub indent_x: u32,
    pub column_id: usize,
}

/// Splits the page at blank vertical strips at least
/// `column_gap_ratio * width` wide. Returns half-open ink ranges; a blank
/// page yields one range over the full width.
pub fn segment_columns(bin: &BinaryImage, cfg: &DetectorConfig) -> Vec<(u32, u32)> {
    let (w, h) = (bin.width() as usize, bin.height() as usize);
    let mut has_ink = vec![false; w];
    for row in bin.data().chunks_exact(w).take(h) {
        for (x, &p) in row.iter().enumerate() {
            has_ink[x] |= p;
        }
    }
    let Some(first) = has_ink.iter().position(|&b| b) else {
        return vec![(0, bin.width())];
    };
    let last = has_ink.iter().rposition(|&b| b).unwrap();
    let min_gap = (cfg.column_gap_ratio * w as f64).ceil().max(1.0) as usize;

    let mut columns = Vec::new();
    let mut start = first;
    let mut x = first;
    while x <= last {
        if has_ink[x] {
            x += 1;
            continue;
        }
        let gap_start = x;
        while !has_ink[x] {
            x += 1;
        }
        if x - gap_start >= min_gap {
            columns.push((start as u32, gap_start as u32));
            start = x;
        }
    }
    columns.push((start as u32, last as u32 + 1));
    columns
}

/// Line extraction on a binarized page; dilates with the default kernel
/// first.
pub fn extract_lines(bin: &BinaryImage, columns: &[(u32, u32)], cfg: &DetectorConfig) -> Vec<LineBlock> {
    let dilated = dilate(bin, DEFAULT_KERNEL_WIDTH, DEFAULT_KERNEL_HEIGHT)
        .expect("default kernel is valid");
    extract_lines_with(bin, &dilated, columns, cfg)
}

#[derive(Debug, Clone, Copy)]
struct Component {
    bbox: RefBox,
    bottom: u32,
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// 4-connected components of `dilated`, each measured by the tight extent of
/// the `binary` pixels it covers. Components without binary pixels are
/// dropped.
fn components(binary: &BinaryImage, dilated: &BinaryImage) -> Vec<Component> {
    let (w, h) = (dilated.width() as usize, dilated.height() as usize);
    // Runs per row as (x0, x1, label).
    let mut runs: Vec<Vec<(usize, usize, u32)>> = Vec::with_capacity(h);
    let mut parent: Vec<u32> = Vec::new();
    for y in 0..h {
        let row = &dilated.data()[y * w..(y + 1) * w];
        let mut row_runs = Vec::new();
        let mut x = 0;
        while x < w {
            if !row[x] {
                x += 1;
                continue;
            }
            let x0 = x;
            while x < w && row[x] {
                x += 1;
            }
            let label = parent.len() as u32;
            parent.push(label);
            if y > 0 {
                for &(px0, px1, pl) in &runs[y - 1] {
                    if px0 < x && x0 < px1 {
                        union(&mut parent, label, pl);
                    }
                }
            }
            row_runs.push((x0, x, label));
        }
        runs.push(row_runs);
    }

    let mut compact = vec![u32::MAX; parent.len()];
    let mut comps: Vec<(Option<RefBox>, Vec<u32>)> = Vec::new();
    for (y, row_runs) in runs.iter().enumerate() {
        let brow = &binary.data()[y * w..(y + 1) * w];
        for &(x0, x1, label) in row_runs {
            let root = find(&mut parent, label) as usize;
            if compact[root] == u32::MAX {
                compact[root] = comps.len() as u32;
                comps.push((None, Vec::new()));
            }
            let slot = &mut comps[compact[root] as usize];
            let Some(first) = brow[x0..x1].iter().position(|&b| b) else {
                continue;
            };
            let last = brow[x0..x1].iter().rposition(|&b| b).unwrap();
            let b = RefBox::from_corners((x0 + first) as u32, y as u32, (x0 + last + 1) as u32, y as u32 + 1);
            slot.0 = Some(slot.0.map_or(b, |o| o.union(&b)));
        }
    }
    comps
        .into_iter()
        .filter_map(|(bbox, _)| bbox)
        .map(|bbox| Component {
            bbox,
            bottom: bbox.bottom(),
        })
        .collect()
}

fn column_of(columns: &[(u32, u32)], b: &RefBox) -> usize {
    let cx = b.x + b.w / 2;
    columns
        .iter()
        .enumerate()
        .min_by_key(|(_, &(s, e))| {
            if cx < s {
                s - cx
            } else if cx >= e {
                cx + 1 - e
            } else {
                0
            }
        })
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn vertical_overlap(a: &RefBox, b: &RefBox) -> u32 {
    a.bottom().min(b.bottom()).saturating_sub(a.y.max(b.y))
}

fn same_row(a: &RefBox, b: &RefBox) -> bool {
    2 * vertical_overlap(a, b) >= a.h.min(b.h)
}

fn horizontal_gap(a: &RefBox, b: &RefBox) -> u32 {
    if a.right() <= b.x {
        b.x - a.right()
    } else if b.right() <= a.x {
        a.x - b.right()
    } else {
        0
    }
}

/// Lower median; keeps a value that actually occurs.
fn lower_median(values: &mut [u32]) -> Option<u32> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    Some(values[(values.len() - 1) / 2])
}

fn adaptive_merge_gap(cols: &[Vec<Component>]) -> u32 {
    let mut gaps = Vec::new();
    for comps in cols {
        for (i, a) in comps.iter().enumerate() {
            let nearest = comps
                .iter()
                .enumerate()
                .filter(|&(j, b)| j != i && b.bbox.x >= a.bbox.right() && same_row(&a.bbox, &b.bbox))
                .map(|(_, b)| b.bbox.x - a.bbox.right())
                .min();
            gaps.extend(nearest);
        }
    }
    lower_median(&mut gaps).map_or(FALLBACK_MERGE_GAP, |g| (2 * g).max(MIN_MERGE_GAP))
}

/// Builds lines from the components of the dilated plane. Components join a
/// line when they share at least half of the smaller height and sit within
/// the merge gap of each other. Output is ordered by column, then top to
/// bottom.
pub fn extract_lines_with(
    binary: &BinaryImage,
    dilated: &BinaryImage,
    columns: &[(u32, u32)],
    cfg: &DetectorConfig,
) -> Vec<LineBlock> {
    let mut per_col: Vec<Vec<Component>> = vec![Vec::new(); columns.len().max(1)];
    for c in components(binary, dilated) {
        per_col[column_of(columns, &c.bbox)].push(c);
    }
    for comps in &mut per_col {
        comps.sort_by_key(|c| (c.bbox.y, c.bbox.x));
    }
    let merge_gap = cfg.line_merge_gap.unwrap_or_else(|| adaptive_merge_gap(&per_col));

    let mut lines = Vec::new();
    for (col, comps) in per_col.iter().enumerate() {
        let mut parent: Vec<u32> = (0..comps.len() as u32).collect();
        for i in 0..comps.len() {
            for j in i + 1..comps.len() {
                let (a, b) = (&comps[i].bbox, &comps[j].bbox);
                if b.y >= a.bottom() {
                    break;
                }
                if same_row(a, b) && horizontal_gap(a, b) <= merge_gap {
                    union(&mut parent, i as u32, j as u32);
                }
            }
        }
        let mut groups: std::collections::BTreeMap<u32, Vec<&Component>> = Default::default();
        for (i, c) in comps.iter().enumerate() {
            groups.entry(find(&mut parent, i as u32)).or_default().push(c);
        }
        let col_start = columns.get(col).map_or(0, |c| c.0);
        let mut col_lines: Vec<LineBlock> = groups
            .into_values()
            .map(|members| {
                let bbox = members
                    .iter()
                    .map(|c| c.bbox)
                    .reduce(|a, b| a.union(&b))
                    .unwrap();
                let mut bottoms: Vec<u32> = members.iter().map(|c| c.bottom).collect();
                LineBlock {
                    bbox,
                    baseline_y: lower_median(&mut bottoms).unwrap(),
                    indent_x: bbox.x.saturating_sub(col_start),
                    column_id: col,
                }
            })
            .collect();
        col_lines.sort_by_key(|l| (l.bbox.y, l.bbox.x));
        lines.extend(col_lines);
    }
    lines
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Cues {
    gap: bool,
    indent: bool,
}

impl Cues {
    fn any(self) -> bool {
        self.gap || self.indent
    }

    fn score(self) -> f64 {
        match (self.gap, self.indent) {
            (true, true) => SCORE_BOTH_CUES,
            (false, false) => SCORE_FALLBACK,
            _ => SCORE_ONE_CUE,
        }
    }
}

/// Groups lines into references, one detection per group.
///
/// A line opens a new reference when its baseline lies more than
/// `ref_gap_factor` typical pitches below the previous one, or when it is
/// flush left in a column whose other lines show a hanging indent. The
/// typical pitch is the median baseline distance, capped at 1.5 median line
/// heights so that pages made of short entries still separate. Input order
/// does not matter.
pub fn group_references(lines: &[LineBlock], cfg: &DetectorConfig) -> Vec<Detection> {
    let mut lines = lines.to_vec();
    lines.sort_by_key(|l| (l.column_id, l.bbox.y, l.bbox.x, l.bbox.w, l.bbox.h, l.baseline_y));
    if lines.is_empty() {
        return Vec::new();
    }

    let mut deltas: Vec<u32> = lines
        .windows(2)
        .filter(|p| p[0].column_id == p[1].column_id)
        .map(|p| p[1].baseline_y.saturating_sub(p[0].baseline_y))
        .collect();
    let mut heights: Vec<u32> = lines.iter().map(|l| l.bbox.h).collect();
    let height = lower_median(&mut heights).unwrap() as f64;
    let pitch = lower_median(&mut deltas).map_or(f64::INFINITY, |d| d as f64);
    let gap_threshold = cfg.ref_gap_factor * pitch.min(1.5 * height);

    let mut out = Vec::new();
    let mut start = 0;
    while start < lines.len() {
        let col = lines[start].column_id;
        let end = lines[start..]
            .iter()
            .position(|l| l.column_id != col)
            .map_or(lines.len(), |p| start + p);
        out.extend(group_column(&lines[start..end], gap_threshold, cfg));
        start = end;
    }
    out
}

fn group_column(lines: &[LineBlock], gap_threshold: f64, cfg: &DetectorConfig) -> Vec<Detection> {
    let flush = lines.iter().map(|l| l.indent_x).min().unwrap();
    let is_flush = |l: &LineBlock| l.indent_x <= flush + cfg.indent_tolerance;
    let hanging = lines.iter().any(|l| !is_flush(l));

    // boundaries[i] holds the cues between lines[i - 1] and lines[i].
    let boundaries: Vec<Cues> = lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                return Cues::default();
            }
            let delta = l.baseline_y.saturating_sub(lines[i - 1].baseline_y) as f64;
            Cues {
                gap: delta > gap_threshold,
                indent: hanging && is_flush(l),
            }
        })
        .collect();

    let starts: Vec<usize> = (0..lines.len()).filter(|&i| i == 0 || boundaries[i].any()).collect();
    starts
        .iter()
        .enumerate()
        .map(|(g, &s)| {
            let e = starts.get(g + 1).copied().unwrap_or(lines.len());
            let bbox = lines[s..e]
                .iter()
                .map(|l| l.bbox)
                .reduce(|a, b| a.union(&b))
                .unwrap();
            let cues = if g > 0 {
                boundaries[s]
            } else {
                starts.get(1).map_or(Cues::default(), |&n| boundaries[n])
            };
            Detection::new(bbox, cues.score())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bin_from_rows(rows: &[&str]) -> BinaryImage {
        let w = rows[0].len() as u32;
        let data = rows.iter().flat_map(|r| r.chars().map(|c| c == '#')).collect();
        BinaryImage::new(w, rows.len() as u32, data).unwrap()
    }

    fn line(y: u32, x: u32, w: u32, col: usize) -> LineBlock {
        LineBlock {
            bbox: RefBox::new(x, y, w, 12),
            baseline_y: y + 12,
            indent_x: x,
            column_id: col,
        }
    }

    #[test]
    fn blank_page_is_one_column() {
        let b = BinaryImage::empty(40, 10).unwrap();
        assert_eq!(segment_columns(&b, &DetectorConfig::default()), vec![(0, 40)]);
        assert!(extract_lines(&b, &[(0, 40)], &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn two_columns_from_projection_gap() {
        let b = bin_from_rows(&[
            "..####..........####....",
            "..##.#..........#..#....",
        ]);
        let cfg = DetectorConfig {
            column_gap_ratio: 0.25,
            ..Default::default()
        };
        assert_eq!(segment_columns(&b, &cfg), vec![(2, 6), (16, 20)]);
    }

    #[test]
    fn rows_separated_by_blank_row_are_two_lines() {
        let b = bin_from_rows(&[
            "#.#.#......#.#",
            "#.#.#......#.#",
            "..............",
            "##..##........",
        ]);
        let lines = extract_lines(&b, &[(0, 14)], &DetectorConfig::default());
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].bbox, RefBox::new(0, 0, 14, 2));
        assert_eq!(lines[1].bbox, RefBox::new(0, 3, 6, 1));
    }

    #[test]
    fn single_line_single_detection() {
        let l = line(10, 0, 50, 0);
        let d = group_references(&[l], &DetectorConfig::default());
        assert_eq!(d, vec![Detection::new(l.bbox, SCORE_FALLBACK)]);
        assert!(group_references(&[], &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn hanging_indent_splits_on_flush_lines() {
        let ls = vec![
            line(0, 0, 100, 0),
            line(20, 36, 60, 0),
            line(40, 0, 100, 0),
            line(60, 36, 80, 0),
            line(80, 36, 20, 0),
        ];
        let d = group_references(&ls, &DetectorConfig::default());
        assert_eq!(d.len(), 2);
        assert!(d.iter().all(|d| d.score == SCORE_ONE_CUE));
        assert_eq!(d[1].bbox, RefBox::new(0, 40, 116, 52));
    }

    #[test]
    fn double_pitch_gap_splits_uniform_indent() {
        let ls: Vec<LineBlock> = [0, 20, 60, 80, 100, 140]
            .iter()
            .map(|&y| line(y, 0, 100, 0))
            .collect();
        let d = group_references(&ls, &DetectorConfig::default());
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn grouping_ignores_input_order() {
        let mut ls = vec![
            line(0, 0, 100, 0),
            line(20, 36, 60, 0),
            line(50, 0, 100, 0),
            line(70, 36, 80, 0),
            line(0, 0, 100, 1),
        ];
        let a = group_references(&ls, &DetectorConfig::default());
        ls.reverse();
        assert_eq!(group_references(&ls, &DetectorConfig::default()), a);
        assert_eq!(a.len(), 3);
        assert_eq!(a[0].score, SCORE_BOTH_CUES);
    }
}
