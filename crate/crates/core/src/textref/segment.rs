use std::sync::LazyLock;

use regex::Regex;

use super::ReferenceString;

static NUMBERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:\[\d+\]|\d+\.\s)").unwrap());
static AUTHOR_YEAR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*\p{Lu}[\p{L}'’\-]+(?:\s+\p{Lu}[\p{L}'’\-]+)*,\s+(?:\p{Lu}\.\s*-?)+").unwrap()
});
static PAREN_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(\d{4}[a-z]?\)").unwrap());
static ALPHA: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\[?\p{Lu}[\p{L}+]*\d{2}[a-z]?(?:\]|\s)").unwrap());

/// Boundary cue families, highest priority first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cue {
    Numbered,
    AuthorYear,
    Alpha,
    BlankLine,
    HangingIndent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub references: Vec<ReferenceString>,
    /// No boundary cue fired; the whole section became one reference.
    pub low_confidence: bool,
}

fn indent(line: &str) -> usize {
    line.chars()
        .take_while(|c| c.is_whitespace())
        .map(|c| if c == '\t' { 4 } else { 1 })
        .sum()
}

fn ends_open(line: &str) -> bool {
    let t = line.trim_end();
    t.ends_with(',') || t.ends_with('&') || t.ends_with(" and") || t.ends_with(" und")
}

/// Lines that open a reference under `cue`. Blank lines never start one.
fn starts(lines: &[&str], cue: Cue) -> Vec<bool> {
    let non_blank = |i: usize| !lines[i].trim().is_empty();
    match cue {
        Cue::Numbered => lines.iter().map(|l| NUMBERED.is_match(l)).collect(),
        Cue::AuthorYear => (0..lines.len())
            .map(|i| {
                AUTHOR_YEAR.is_match(lines[i])
                    && PAREN_YEAR.is_match(lines[i])
                    && !(i > 0 && ends_open(lines[i - 1]))
            })
            .collect(),
        Cue::Alpha => lines.iter().map(|l| ALPHA.is_match(l)).collect(),
        Cue::BlankLine => (0..lines.len())
            .map(|i| non_blank(i) && i > 0 && !non_blank(i - 1))
            .collect(),
        Cue::HangingIndent => {
            let indents: Vec<usize> = (0..lines.len())
                .filter(|&i| non_blank(i))
                .map(|i| indent(lines[i]))
                .collect();
            let Some(&flush) = indents.iter().min() else {
                return vec![false; lines.len()];
            };
            if !indents.iter().any(|&d| d > flush) {
                return vec![false; lines.len()];
            }
            (0..lines.len())
                .map(|i| non_blank(i) && indent(lines[i]) == flush)
                .collect()
        }
    }
}

/// Splits a bibliography into reference strings.
///
/// The first cue family that fires anywhere in the section decides all
/// boundaries: numbered markers, then author-year openings, alpha labels,
/// blank lines, and finally hanging indentation. Lines before the first
/// marker belong to the first reference. Spans never start or end on a
/// blank line, so every non-blank line lands in exactly one span.
pub fn segment_references<S: AsRef<str>>(lines: &[S]) -> Segmentation {
    let lines: Vec<&str> = lines.iter().map(AsRef::as_ref).collect();
    let first_content = lines.iter().position(|l| !l.trim().is_empty());
    let Some(first_content) = first_content else {
        return Segmentation {
            references: Vec::new(),
            low_confidence: false,
        };
    };

    let mut chosen = None;
    for cue in [Cue::Numbered, Cue::AuthorYear, Cue::Alpha, Cue::BlankLine, Cue::HangingIndent] {
        let s = starts(&lines, cue);
        // A cue only counts when it separates something beyond the first line.
        if s.iter().enumerate().any(|(i, &b)| b && i > first_content) {
            chosen = Some(s);
            break;
        }
        if cue != Cue::BlankLine && cue != Cue::HangingIndent && s[first_content] {
            chosen = Some(s);
            break;
        }
    }
    let low_confidence = chosen.is_none();
    let starts = chosen.unwrap_or_else(|| vec![false; lines.len()]);

    let mut references = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let flush = |span: (usize, usize), refs: &mut Vec<ReferenceString>| {
        refs.push(ReferenceString::new(lines[span.0..span.1].join("\n"), span));
    };
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match current {
            Some(span) if !starts[i] => current = Some((span.0, i + 1)),
            Some(span) => {
                flush(span, &mut references);
                current = Some((i, i + 1));
            }
            None => current = Some((i, i + 1)),
        }
    }
    if let Some(span) = current {
        flush(span, &mut references);
    }
    Segmentation {
        references,
        low_confidence,
    }
}

/// Segments the plain text of a whole section.
pub fn segment_text(text: &str) -> Segmentation {
    let lines: Vec<&str> = text.lines().collect();
    segment_references(&lines)
}
