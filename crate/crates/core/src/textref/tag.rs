use std::sync::LazyLock;

use regex::Regex;

use super::{Namer, ReferenceString, TaggedReference};

pub const MIN_YEAR: i32 = 1400;
pub const MAX_YEAR: i32 = 2100;

static LEADING_LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:\[[^\]]{1,12}\]|\d{1,4}\.\s|\p{Lu}[\p{L}+]*\d{2}[a-z]?\])\s*").unwrap()
});
static PAREN_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\((\d{4})[a-z]?\)").unwrap());
static BARE_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d{4})[a-z]?\b").unwrap());
/// A segment with volume/issue/page numbers or a venue keyword.
static VENUE_CUE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)
        \b(?:journal|proceedings|proc\.|conference|symposium|workshop|transactions|review|
            letters|press|publishers?|university|zeitschrift|verlag|vol\.|pp\.|volume|edition)\b
        | ^in[\s:]
        | \d+\s*\(\d+\)
        | \d+\s*[-–]\s*\d+",
    )
    .unwrap()
});
/// Trailing volume, issue and page numbers after a venue name.
static VENUE_TAIL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(.*?)(?:,?\s+\d.*)?$").unwrap());
static INITIALS_ONLY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\p{Lu}\.\s*-?\s*)+$").unwrap());

fn valid_year(y: &str) -> Option<i32> {
    y.parse::<i32>().ok().filter(|y| (MIN_YEAR..=MAX_YEAR).contains(y))
}

/// Year and its byte range; parenthesized years take precedence.
fn find_year(text: &str) -> Option<(i32, usize, usize)> {
    let from = |re: &Regex| {
        re.captures_iter(text).find_map(|c| {
            let whole = c.get(0).unwrap();
            valid_year(&c[1]).map(|y| (y, whole.start(), whole.end()))
        })
    };
    from(&PAREN_YEAR).or_else(|| from(&BARE_YEAR))
}

/// Byte offsets just past each sentence-ending period: a period followed by
/// whitespace whose preceding word is not a single initial.
fn period_breaks(text: &str) -> Vec<usize> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    for (i, _) in text.match_indices('.') {
        let followed_by_space = bytes.get(i + 1).is_none_or(|b| b.is_ascii_whitespace());
        if !followed_by_space {
            continue;
        }
        let word: String = text[..i]
            .chars()
            .rev()
            .take_while(|c| c.is_alphanumeric())
            .collect();
        let initial = word.chars().count() == 1 && word.chars().all(char::is_uppercase);
        if !initial {
            out.push(i + 1);
        }
    }
    out
}

fn trim_punct(s: &str) -> &str {
    s.trim_matches(|c: char| c.is_whitespace() || matches!(c, ',' | ';' | ':' | '.' | '(' | ')'))
}

/// Trims separators around the author block, keeping the period of a final
/// initial.
fn trim_author_block(s: &str) -> &str {
    let s = s.trim_end_matches(|c: char| c.is_whitespace() || matches!(c, ',' | ';' | ':' | '(' | '&'));
    let s = s.trim_start();
    match s.strip_suffix('.') {
        Some(head) => {
            let last: String = head.chars().rev().take_while(|c| c.is_alphanumeric()).collect();
            if last.chars().count() == 1 && last.chars().all(char::is_uppercase) {
                s
            } else {
                head
            }
        }
        None => s,
    }
}

fn split_authors(block: &str) -> Vec<String> {
    let block = block.replace(" & ", ", ").replace(" and ", ", ").replace(" und ", ", ");
    let mut authors: Vec<String> = Vec::new();
    for part in block.split([',', ';']) {
        let part = part.trim().trim_start_matches('&').trim();
        if part.is_empty() {
            continue;
        }
        if INITIALS_ONLY.is_match(part) {
            if let Some(last) = authors.last_mut() {
                if !last.contains(',') {
                    last.push_str(", ");
                    last.push_str(part);
                    continue;
                }
            }
        }
        authors.push(part.to_string());
    }
    authors
        .into_iter()
        .filter(|a| a.chars().any(char::is_alphabetic))
        .collect()
}

/// Rule-based metadata tagging. Fields are only filled from text present in
/// the reference; anything not found stays empty.
pub fn tag_metadata(r: &ReferenceString) -> TaggedReference {
    let mut out = TaggedReference::untagged(r.raw.clone(), Namer::ParscitLike);
    let text = super::normalize_whitespace(&r.raw);
    let body_start = LEADING_LABEL.find(&text).map_or(0, |m| m.end());
    let body = &text[body_start..];
    if body.is_empty() {
        return out;
    }

    let year = find_year(body);
    out.year = year.map(|(y, _, _)| y);

    let breaks = period_breaks(body);
    let first_break = breaks.first().copied().unwrap_or(body.len());
    let author_end = match year {
        Some((_, s, _)) if s < first_break => s,
        _ => first_break,
    };
    out.authors = split_authors(trim_author_block(&body[..author_end]));

    // Sentence-like segments after the author block, skipping the year.
    let rest_start = match year {
        Some((_, s, e)) if s == author_end => breaks.iter().copied().find(|&b| b >= e).unwrap_or(e),
        _ => first_break,
    };
    let mut segments: Vec<&str> = Vec::new();
    let mut prev = rest_start;
    for &b in breaks.iter().filter(|&&b| b > rest_start).chain(std::iter::once(&body.len())) {
        let seg = trim_punct(&body[prev..b]);
        if seg.chars().any(char::is_alphabetic) {
            segments.push(seg);
        }
        prev = b;
    }
    let venue_at = segments.iter().position(|s| VENUE_CUE.is_match(s));
    let title_pool = &segments[..venue_at.unwrap_or(segments.len())];
    out.title = title_pool
        .iter()
        .enumerate()
        .max_by_key(|(i, s)| (s.chars().count(), std::cmp::Reverse(*i)))
        .map(|(_, s)| s.to_string())
        .filter(|s| year.is_none_or(|(y, _, _)| s != &y.to_string()));
    out.venue = venue_at.and_then(|i| {
        let caps = VENUE_TAIL.captures(segments[i])?;
        let v = trim_punct(caps.get(1)?.as_str());
        let v = v.strip_prefix("In ").or_else(|| v.strip_prefix("In: ")).unwrap_or(v);
        (!v.is_empty() && v.chars().any(char::is_alphabetic)).then(|| v.to_string())
    });
    out
}
