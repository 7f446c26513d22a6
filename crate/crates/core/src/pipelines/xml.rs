//! XML output: one `<document>` with references grouped by page.
//!
//! Each `<reference>` carries `detector` (which pipeline found it), `namer`
//! (which tagger produced the metadata) and `source` (ensemble provenance).
//! Characters that XML 1.0 cannot represent are written as U+FFFD.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{DetectorAttr, ExtractionResult, RefRecord, Source};
use crate::dataset::RefBox;
use crate::textref::TaggedReference;

pub use super::schema::validate_xml;

pub const GENERATOR: &str = "refscan";
/// The schema shipped with the crate; emitted documents validate against it.
pub const SCHEMA_XSD: &str = include_str!("../../schema/refscan-result.xsd");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum XmlError {
    #[error("malformed XML: {0}")]
    Malformed(String),
    #[error("unexpected structure: {0}")]
    Structure(String),
}

fn is_xml_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..)
}

fn escape(s: &str, attribute: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            '"' if attribute => out.push_str("&quot;"),
            '\n' if attribute => out.push_str("&#10;"),
            '\t' if attribute => out.push_str("&#9;"),
            c if !is_xml_char(c) => out.push('\u{FFFD}'),
            c => out.push(c),
        }
    }
    out
}

fn text_element(out: &mut String, indent: &str, name: &str, value: &str) {
    let _ = writeln!(out, "{indent}<{name}>{}</{name}>", escape(value, false));
}

fn write_reference(out: &mut String, r: &RefRecord) {
    let _ = write!(
        out,
        "    <reference detector=\"{}\" namer=\"{}\" source=\"{}\"",
        r.detector,
        escape(r.namer(), true),
        r.source
    );
    if let Some(score) = r.score.filter(|s| s.is_finite()) {
        let _ = write!(out, " score=\"{score}\"");
    }
    out.push_str(">\n");
    let t = &r.tagged;
    text_element(out, "      ", "raw", &t.raw);
    if let Some(b) = r.bbox {
        let _ = writeln!(out, "      <box x=\"{}\" y=\"{}\" w=\"{}\" h=\"{}\"/>", b.x, b.y, b.w, b.h);
    }
    if t.authors.is_empty() {
        out.push_str("      <authors/>\n");
    } else {
        out.push_str("      <authors>\n");
        for a in &t.authors {
            text_element(out, "        ", "author", a);
        }
        out.push_str("      </authors>\n");
    }
    if let Some(title) = &t.title {
        text_element(out, "      ", "title", title);
    }
    if let Some(year) = t.year {
        let _ = writeln!(out, "      <year>{year}</year>");
    }
    if let Some(venue) = &t.venue {
        text_element(out, "      ", "venue", venue);
    }
    out.push_str("    </reference>\n");
}

/// Serializes `result` as UTF-8 XML. Pages appear in ascending order and
/// only when they hold records; records keep their order within a page.
pub fn emit_xml(result: &ExtractionResult) -> Vec<u8> {
    let mut by_page: BTreeMap<u32, Vec<&RefRecord>> = BTreeMap::new();
    for r in &result.records {
        by_page.entry(r.page).or_default().push(r);
    }
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = write!(
        out,
        "<document generator=\"{GENERATOR}\" version=\"{}\" pages=\"{}\"",
        env!("CARGO_PKG_VERSION"),
        result.pages
    );
    if by_page.is_empty() && result.warnings.is_empty() {
        out.push_str("/>\n");
        return out.into_bytes();
    }
    out.push_str(">\n");
    for (page, records) in by_page {
        let _ = writeln!(out, "  <page n=\"{page}\">");
        for r in records {
            write_reference(&mut out, r);
        }
        out.push_str("  </page>\n");
    }
    if !result.warnings.is_empty() {
        out.push_str("  <warnings>\n");
        for w in &result.warnings {
            text_element(&mut out, "    ", "warning", w);
        }
        out.push_str("  </warnings>\n");
    }
    out.push_str("</document>\n");
    out.into_bytes()
}

type Node<'a, 'i> = roxmltree::Node<'a, 'i>;

fn structure(msg: impl Into<String>) -> XmlError {
    XmlError::Structure(msg.into())
}

fn elements<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(|c| c.is_element())
}

fn text(node: Node) -> String {
    node.children().filter(|c| c.is_text()).filter_map(|c| c.text()).collect()
}

fn attr<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str, XmlError> {
    node.attribute(name)
        .ok_or_else(|| structure(format!("<{}> lacks attribute `{name}`", node.tag_name().name())))
}

fn number<T: std::str::FromStr>(node: Node, name: &str) -> Result<T, XmlError> {
    let v = attr(node, name)?;
    v.parse()
        .map_err(|_| structure(format!("attribute `{name}` of <{}>: bad number `{v}`", node.tag_name().name())))
}

fn parse_reference(node: Node, page: u32) -> Result<RefRecord, XmlError> {
    let detector: DetectorAttr = attr(node, "detector")?.parse().map_err(structure)?;
    let source: Source = attr(node, "source")?.parse().map_err(structure)?;
    let namer = attr(node, "namer")?.parse().unwrap();
    let score = node.attribute("score").map(|_| number::<f64>(node, "score")).transpose()?;
    let mut tagged = TaggedReference::untagged(String::new(), namer);
    let mut bbox = None;
    let mut seen_raw = false;
    for child in elements(node) {
        match child.tag_name().name() {
            "raw" => {
                tagged.raw = text(child);
                seen_raw = true;
            }
            "box" => {
                bbox = Some(RefBox::new(
                    number(child, "x")?,
                    number(child, "y")?,
                    number(child, "w")?,
                    number(child, "h")?,
                ))
            }
            "authors" => {
                tagged.authors = elements(child)
                    .filter(|a| a.has_tag_name("author"))
                    .map(text)
                    .collect()
            }
            "title" => tagged.title = Some(text(child)),
            "year" => {
                let y = text(child);
                tagged.year = Some(y.trim().parse().map_err(|_| structure(format!("bad year `{y}`")))?);
            }
            "venue" => tagged.venue = Some(text(child)),
            other => return Err(structure(format!("unexpected <{other}> in <reference>"))),
        }
    }
    if !seen_raw {
        return Err(structure("<reference> without <raw>"));
    }
    Ok(RefRecord {
        page,
        bbox,
        source,
        detector,
        score,
        tagged,
    })
}

/// Reads a document written by [`emit_xml`].
pub fn parse_xml(xml: &[u8]) -> Result<ExtractionResult, XmlError> {
    let s = std::str::from_utf8(xml).map_err(|e| XmlError::Malformed(e.to_string()))?;
    let doc = roxmltree::Document::parse(s).map_err(|e| XmlError::Malformed(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("document") {
        return Err(structure(format!("root element is <{}>", root.tag_name().name())));
    }
    let mut result = ExtractionResult {
        pages: number(root, "pages")?,
        ..Default::default()
    };
    for child in elements(root) {
        match child.tag_name().name() {
            "page" => {
                let n: u32 = number(child, "n")?;
                for r in elements(child) {
                    if !r.has_tag_name("reference") {
                        return Err(structure(format!("unexpected <{}> in <page>", r.tag_name().name())));
                    }
                    result.records.push(parse_reference(r, n)?);
                }
            }
            "warnings" => result.warnings.extend(elements(child).map(text)),
            other => return Err(structure(format!("unexpected <{other}> in <document>"))),
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textref::Namer;

    fn layout_record() -> RefRecord {
        RefRecord {
            page: 1,
            bbox: Some(RefBox::new(10, 20, 300, 40)),
            source: Source::LayoutOnly,
            detector: DetectorAttr::Layout,
            score: Some(0.95),
            tagged: TaggedReference {
                raw: "Smith, J. (1999). A & B <c>.\nJournal X.".into(),
                authors: vec!["Smith, J.".into()],
                title: Some("A & B <c>".into()),
                year: Some(1999),
                venue: Some("Journal X".into()),
                namer: Namer::ParscitLike,
            },
        }
    }

    #[test]
    fn empty_result_is_a_bare_document() {
        let xml = String::from_utf8(emit_xml(&ExtractionResult::default())).unwrap();
        assert!(xml.contains("<document generator=\"refscan\""));
        assert!(xml.trim_end().ends_with("pages=\"0\"/>"));
        assert_eq!(parse_xml(xml.as_bytes()).unwrap(), ExtractionResult::default());
        validate_xml(&xml).unwrap();
    }

    #[test]
    fn single_layout_record() {
        let result = ExtractionResult {
            pages: 1,
            records: vec![layout_record()],
            warnings: vec!["w1\r\n".into()],
        };
        let xml = String::from_utf8(emit_xml(&result)).unwrap();
        assert!(xml.contains(r#"<reference detector="layout" namer="parscit-like" source="layout-only" score="0.95">"#));
        assert!(xml.contains(r#"<box x="10" y="20" w="300" h="40"/>"#));
        validate_xml(&xml).unwrap();
        assert_eq!(parse_xml(xml.as_bytes()).unwrap(), result);
    }

    #[test]
    fn illegal_characters_are_replaced() {
        let mut r = layout_record();
        r.tagged.raw = "a\u{1}b\u{FFFF}".into();
        let xml = emit_xml(&ExtractionResult {
            pages: 1,
            records: vec![r],
            warnings: vec![],
        });
        let back = parse_xml(&xml).unwrap();
        assert_eq!(back.records[0].raw(), "a\u{FFFD}b\u{FFFD}");
    }

    #[test]
    fn pages_are_grouped_in_order() {
        let mut a = layout_record();
        a.page = 2;
        let b = layout_record();
        let result = ExtractionResult {
            pages: 2,
            records: vec![a, b],
            warnings: vec![],
        };
        let back = parse_xml(&emit_xml(&result)).unwrap();
        assert_eq!(back, result.canonicalized());
    }
}
