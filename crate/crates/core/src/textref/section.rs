use std::sync::LazyLock;

use regex::Regex;

/// Headings that open a bibliography, compared case-insensitively.
const REFERENCE_HEADINGS: &[&str] = &[
    "references",
    "reference",
    "bibliography",
    "literatur",
    "literaturverzeichnis",
    "works cited",
    "literature cited",
    "quellen",
    "quellenverzeichnis",
];

/// Headings that end a bibliography when they follow it.
const TRAILING_HEADINGS: &[&str] = &[
    "appendix",
    "appendices",
    "anhang",
    "acknowledgments",
    "acknowledgements",
    "acknowledgment",
    "acknowledgement",
    "danksagung",
    "about the authors",
    "author biographies",
    "supplementary material",
];

/// Numbering, markup and trailing punctuation around a heading.
static HEADING_DECOR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:#+\s*)?(?:(?:\d+(?:\.\d+)*|[IVXLC]+|[A-Z])[.)]?\s+)?(.*?)[\s:.]*$").unwrap()
});

fn heading_text(line: &str) -> Option<String> {
    let t = line.trim();
    if t.is_empty() || t.chars().count() > 60 {
        return None;
    }
    let caps = HEADING_DECOR.captures(t)?;
    Some(caps[1].to_lowercase())
}

pub fn is_reference_heading(line: &str) -> bool {
    heading_text(line).is_some_and(|h| REFERENCE_HEADINGS.contains(&h.as_str()))
}

fn is_trailing_heading(line: &str) -> bool {
    heading_text(line).is_some_and(|h| {
        TRAILING_HEADINGS
            .iter()
            .any(|k| h == *k || h.strip_prefix(k).is_some_and(|r| r.starts_with(' ')))
    })
}

/// Line range of the bibliography.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectionRange {
    pub start: usize,
    pub end: usize,
    /// Index of the heading line, `None` when no heading was found and the
    /// range covers the whole document.
    pub heading: Option<usize>,
}

impl SectionRange {
    pub fn found(&self) -> bool {
        self.heading.is_some()
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Finds the last reference heading; the section runs from the line after it
/// up to the next trailing heading (appendix, acknowledgements, ...) or the
/// end of the document.
pub fn find_reference_section<S: AsRef<str>>(lines: &[S]) -> SectionRange {
    let Some(h) = lines.iter().rposition(|l| is_reference_heading(l.as_ref())) else {
        return SectionRange {
            start: 0,
            end: lines.len(),
            heading: None,
        };
    };
    let end = lines[h + 1..]
        .iter()
        .position(|l| is_trailing_heading(l.as_ref()))
        .map_or(lines.len(), |p| h + 1 + p);
    SectionRange {
        start: h + 1,
        end,
        heading: Some(h),
    }
}

pub const DUMMY_TEXT_VERSION: u32 = 1;

/// Body text placed in front of heading-less reference lists so that
/// section finding and segmentation see a regular document. Changing it
/// requires bumping [`DUMMY_TEXT_VERSION`].
pub const DUMMY_TEXT: &str = "\
This document body is a fixed placeholder inserted ahead of a reference list \
so that the extraction tools see the structure of a complete article. It \
carries no content of its own and is discarded after processing.

The placeholder keeps ordinary prose above the bibliography heading, which \
helps tools that expect an article body before the list of cited works.

References
";

pub fn append_dummy_text(text: &str, enabled: bool) -> String {
    if enabled {
        format!("{DUMMY_TEXT}{text}")
    } else {
        text.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_variants() {
        for h in ["References", "REFERENCES:", "7. References", "VII References", "## Bibliography", "Literaturverzeichnis", "Works Cited"] {
            assert!(is_reference_heading(h), "{h}");
        }
        for h in ["References are listed below in the order of citation", "[1] References"] {
            assert!(!is_reference_heading(h), "{h}");
        }
    }

    #[test]
    fn simple_section() {
        let r = find_reference_section(&["Intro", "References", "[1] A. Smith. Title. 1999."]);
        assert_eq!((r.start, r.end, r.heading), (2, 3, Some(1)));
    }

    #[test]
    fn missing_heading_covers_everything() {
        let r = find_reference_section(&["a", "b"]);
        assert_eq!((r.start, r.end), (0, 2));
        assert!(!r.found());
    }

    #[test]
    fn later_heading_wins_and_appendix_ends() {
        let lines = ["References", "x", "Body", "References", "[1] y", "Appendix A", "z"];
        let r = find_reference_section(&lines);
        assert_eq!((r.start, r.end), (4, 5));
    }

    #[test]
    fn dummy_text() {
        assert_eq!(append_dummy_text("abc", false), "abc");
        assert_eq!(append_dummy_text("", true), DUMMY_TEXT);
        let text = append_dummy_text("Smith, J. (1999). T.\nDoe", true);
        let lines: Vec<&str> = text.lines().collect();
        let r = find_reference_section(&lines);
        assert_eq!(lines[r.start], "Smith, J. (1999). T.");
        assert_eq!(r.end, lines.len());
    }
}
