//! Text pipeline: bibliography section, segmentation, tagging.

use std::time::Instant;

use super::{DetectorAttr, PipelineOutput, RefRecord, Source, Tagger};
use crate::textref::{append_dummy_text, find_reference_section, segment_references, ReferenceString, DUMMY_TEXT};

/// Extracts references from the text of each page (one string per page).
///
/// With `dummy_text` the placeholder article body is put in front first, so
/// heading-less reference lists are found as a section. Line spans of the
/// resulting references index the concatenated pages without placeholder.
pub fn run_text<S: AsRef<str>>(pages: &[S], dummy_text: bool, tagger: &Tagger) -> PipelineOutput {
    let mut out = PipelineOutput::default();
    if pages.iter().all(|p| p.as_ref().trim().is_empty()) {
        out.warnings.push("no text could be extracted".into());
        return out;
    }
    let t = Instant::now();

    // Page number (1-based) of every document line.
    let mut page_of_line = Vec::new();
    let mut joined = String::new();
    for (i, page) in pages.iter().enumerate() {
        for line in page.as_ref().lines() {
            joined.push_str(line);
            joined.push('\n');
            page_of_line.push(i as u32 + 1);
        }
    }
    let offset = if dummy_text { DUMMY_TEXT.lines().count() } else { 0 };
    let text = append_dummy_text(&joined, dummy_text);
    let lines: Vec<&str> = text.lines().collect();

    let section = find_reference_section(&lines);
    if !section.found() {
        out.warnings.push("no reference heading found; the whole text was segmented".into());
    }
    let segmentation = segment_references(&lines[section.start..section.end]);
    if segmentation.low_confidence {
        out.warnings.push("no reference boundaries recognised; the section was kept as one reference".into());
    }
    let refs: Vec<ReferenceString> = segmentation
        .references
        .into_iter()
        .map(|r| {
            let start = (section.start + r.line_span.0).saturating_sub(offset);
            let end = (section.start + r.line_span.1).saturating_sub(offset);
            ReferenceString::new(r.raw, (start, end))
        })
        .collect();
    let tagging = tagger.tag(&refs);
    out.warnings.extend(tagging.warnings);
    out.records = refs
        .iter()
        .zip(tagging.references)
        .map(|(r, tagged)| RefRecord {
            page: page_of_line.get(r.line_span.0).copied().unwrap_or(1),
            bbox: None,
            source: Source::TextOnly,
            detector: DetectorAttr::Text,
            score: None,
            tagged,
        })
        .collect();
    out.timings.segment += t.elapsed().as_secs_f64();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbered_txt() {
        let out = run_text(&["References\n[1] A. Smith. One. 1999.\n[2] B. Doe. Two. 2001."], false, &Tagger::Rules);
        assert_eq!(out.records.len(), 2);
        assert!(out.records.iter().all(|r| r.bbox.is_none() && r.detector == DetectorAttr::Text));
        assert_eq!(out.records[1].raw(), "[2] B. Doe. Two. 2001.");
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
    }

    #[test]
    fn empty_text_warns() {
        let out = run_text(&["", "  \n"], true, &Tagger::Rules);
        assert!(out.records.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn pages_follow_lines() {
        let out = run_text(&["Body\nReferences\n[1] A.", "[2] B.\n[3] C."], true, &Tagger::Rules);
        let pages: Vec<u32> = out.records.iter().map(|r| r.page).collect();
        assert_eq!(pages, [1, 2, 2]);
    }

    #[test]
    fn dummy_text_finds_heading_less_list() {
        let input = ["Smith, J. (1999). One.\nDoe, A. (2001). Two."];
        let with = run_text(&input, true, &Tagger::Rules);
        let without = run_text(&input, false, &Tagger::Rules);
        assert_eq!(with.records.len(), 2);
        assert!(with.warnings.is_empty());
        assert!(without.warnings.iter().any(|w| w.contains("no reference heading")));
        assert_eq!(with.records[0].page, 1);
    }
}
