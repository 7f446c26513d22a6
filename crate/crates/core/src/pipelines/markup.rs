//! Markup pipelines for HTML and XML documents.
//!
//! Both formats are read into the same small element tree. Direct mode maps
//! tag-map selectors onto reference fields; text mode flattens the document
//! into lines (one per reference element or leaf block) and hands them to the
//! text pipeline. Layout mode lives in the extractor because it needs the
//! converter and rasterizer adapters.

use serde::{Deserialize, Serialize};

use super::{run_text, DetectorAttr, PipelineError, PipelineOutput, RefRecord, Source, Tagger};
use crate::textref::{normalize_whitespace, Namer, TaggedReference, MAX_YEAR, MIN_YEAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkupKind {
    Html,
    Xml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkupMode {
    Direct,
    Text,
    Layout,
}

/// Selectors per reference field. A selector is an element name (`ref`),
/// a class (`.citation`) or both (`li.citation`); element names compare
/// case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TagMap {
    pub reference: Vec<String>,
    pub author: Vec<String>,
    pub title: Vec<String>,
    pub year: Vec<String>,
    pub venue: Vec<String>,
}

impl Default for TagMap {
    fn default() -> Self {
        let v = |items: &[&str]| items.iter().map(|s| s.to_string()).collect();
        Self {
            reference: v(&["reference", "ref", "citation", "bibitem", "biblStruct", ".reference", ".citation"]),
            author: v(&["author", ".author"]),
            title: v(&["title", "article-title", ".title"]),
            year: v(&["year", "date", ".year"]),
            venue: v(&["venue", "journal", "source", "booktitle", ".venue", ".journal"]),
        }
    }
}

/// Name used in the `namer` attribute for direct-mode records.
pub const TAG_MAP_NAMER: &str = "tag-map";

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum MNode {
    Element(MElement),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct MElement {
    pub name: String,
    pub classes: Vec<String>,
    pub children: Vec<MNode>,
}

/// Parsed markup document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkupDocument {
    kind: MarkupKind,
    root: MElement,
}

const HTML_INLINE: &[&str] = &[
    "a", "abbr", "b", "bdi", "bdo", "cite", "code", "data", "dfn", "em", "font", "i", "kbd", "mark", "q", "s",
    "samp", "small", "span", "strong", "sub", "sup", "time", "u", "var",
];
const HTML_SKIPPED: &[&str] = &["head", "script", "style", "noscript", "template"];

fn from_xml(node: roxmltree::Node) -> MElement {
    MElement {
        name: node.tag_name().name().to_string(),
        classes: node
            .attribute("class")
            .map(|c| c.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default(),
        children: node
            .children()
            .filter_map(|c| {
                if c.is_element() {
                    Some(MNode::Element(from_xml(c)))
                } else if c.is_text() {
                    c.text().map(|t| MNode::Text(t.to_string()))
                } else {
                    None
                }
            })
            .collect(),
    }
}

fn from_html(el: scraper::ElementRef) -> Option<MElement> {
    if HTML_SKIPPED.contains(&el.value().name()) {
        return None;
    }
    let children = el
        .children()
        .filter_map(|c| match c.value().as_text() {
            Some(t) => Some(MNode::Text(t.to_string())),
            None => scraper::ElementRef::wrap(c).and_then(from_html).map(MNode::Element),
        })
        .collect();
    Some(MElement {
        name: el.value().name().to_string(),
        classes: el.value().classes().map(str::to_string).collect(),
        children,
    })
}

/// Parses an HTML or XML document.
pub fn parse_markup(source: &str, kind: MarkupKind) -> Result<MarkupDocument, PipelineError> {
    let root = match kind {
        MarkupKind::Xml => {
            let opts = roxmltree::ParsingOptions {
                allow_dtd: true,
                ..Default::default()
            };
            let doc = roxmltree::Document::parse_with_options(source, opts)
                .map_err(|e| PipelineError::Markup(e.to_string()))?;
            from_xml(doc.root_element())
        }
        MarkupKind::Html => {
            let html = scraper::Html::parse_document(source);
            from_html(html.root_element())
                .ok_or_else(|| PipelineError::Markup("HTML document has no usable root element".into()))?
        }
    };
    Ok(MarkupDocument { kind, root })
}

/// Marks an element boundary while collecting text.
const BOUNDARY: char = '\u{0}';

fn resolve_boundaries(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    for (i, &c) in chars.iter().enumerate() {
        if c != BOUNDARY {
            out.push(c);
            continue;
        }
        let prev = out.chars().last();
        let next = chars[i + 1..].iter().find(|&&n| n != BOUNDARY);
        let joined = prev.is_none_or(|p| p.is_whitespace() || matches!(p, '(' | '['))
            || next.is_none_or(|n| n.is_whitespace() || matches!(n, '.' | ',' | ';' | ':' | '!' | '?' | ')' | ']'));
        if !joined {
            out.push(' ');
        }
    }
    normalize_whitespace(&out)
}

fn matches(el: &MElement, selectors: &[String]) -> bool {
    selectors.iter().any(|sel| {
        let (name, class) = match sel.split_once('.') {
            Some((n, c)) => (n, Some(c)),
            None => (sel.as_str(), None),
        };
        (name.is_empty() || el.name.eq_ignore_ascii_case(name))
            && class.is_none_or(|c| el.classes.iter().any(|k| k == c))
    })
}

impl MarkupDocument {
    fn is_inline(&self, el: &MElement) -> bool {
        self.kind == MarkupKind::Html && HTML_INLINE.contains(&el.name.to_ascii_lowercase().as_str())
    }

    fn collect_text(&self, el: &MElement, out: &mut String) {
        for c in &el.children {
            match c {
                MNode::Text(t) => out.push_str(t),
                MNode::Element(e) if self.is_inline(e) => self.collect_text(e, out),
                MNode::Element(e) => {
                    out.push(BOUNDARY);
                    self.collect_text(e, out);
                    out.push(BOUNDARY);
                }
            }
        }
    }

    /// Text content with whitespace collapsed. Element boundaries become a
    /// space unless whitespace or punctuation already separates the words.
    fn text_of(&self, el: &MElement) -> String {
        let mut s = String::new();
        self.collect_text(el, &mut s);
        resolve_boundaries(&s)
    }

    /// Outermost descendants (or `el` itself) matching `selectors`.
    fn find<'a>(&self, el: &'a MElement, selectors: &[String], out: &mut Vec<&'a MElement>) {
        if matches(el, selectors) {
            out.push(el);
            return;
        }
        for c in &el.children {
            if let MNode::Element(e) = c {
                self.find(e, selectors, out);
            }
        }
    }

    fn all<'a>(&self, el: &'a MElement, selectors: &[String]) -> Vec<&'a MElement> {
        let mut out = Vec::new();
        for c in &el.children {
            if let MNode::Element(e) = c {
                self.find(e, selectors, &mut out);
            }
        }
        out
    }

    /// Elements matched by the reference selectors, in document order.
    fn references(&self, map: &TagMap) -> Vec<&MElement> {
        let mut out = Vec::new();
        self.find(&self.root, &map.reference, &mut out);
        out
    }

    fn tagged(&self, el: &MElement, map: &TagMap) -> TaggedReference {
        let first = |sel: &[String]| {
            self.all(el, sel)
                .first()
                .map(|e| self.text_of(e))
                .filter(|s| !s.is_empty())
        };
        let year = first(&map.year).and_then(|y| {
            let digits: String = y.chars().skip_while(|c| !c.is_ascii_digit()).take(4).collect();
            digits
                .parse::<i32>()
                .ok()
                .filter(|v| digits.len() == 4 && (MIN_YEAR..=MAX_YEAR).contains(v))
        });
        TaggedReference {
            raw: self.text_of(el),
            authors: self
                .all(el, &map.author)
                .into_iter()
                .map(|a| self.text_of(a))
                .filter(|a| !a.is_empty())
                .collect(),
            title: first(&map.title),
            year,
            venue: first(&map.venue),
            namer: Namer::External {
                tool: TAG_MAP_NAMER.into(),
            },
        }
    }

    fn has_block_child(&self, el: &MElement) -> bool {
        el.children.iter().any(|c| match c {
            MNode::Element(e) => !self.is_inline(e) || self.has_block_child(e),
            MNode::Text(_) => false,
        })
    }

    fn push_lines(&self, el: &MElement, map: &TagMap, lines: &mut Vec<String>) {
        if matches(el, &map.reference) {
            lines.push(self.text_of(el));
            lines.push(String::new());
            return;
        }
        if !self.has_block_child(el) {
            let t = self.text_of(el);
            if !t.is_empty() {
                lines.push(t);
            }
            return;
        }
        let mut pending = String::new();
        let flush = |pending: &mut String, lines: &mut Vec<String>| {
            let t = resolve_boundaries(pending);
            if !t.is_empty() {
                lines.push(t);
            }
            pending.clear();
        };
        for c in &el.children {
            match c {
                MNode::Text(t) => pending.push_str(t),
                MNode::Element(e) if self.is_inline(e) && !self.has_block_child(e) => self.collect_text(e, &mut pending),
                MNode::Element(e) => {
                    flush(&mut pending, lines);
                    self.push_lines(e, map, lines);
                }
            }
        }
        flush(&mut pending, lines);
    }

    /// Plain-text rendering: one line per reference element (followed by a
    /// blank line) or per leaf block.
    pub fn text_lines(&self, map: &TagMap) -> Vec<String> {
        let mut lines = Vec::new();
        self.push_lines(&self.root, map, &mut lines);
        lines
    }
}

/// Direct and text modes. Layout mode needs external converters and is run
/// through [`super::Extractor`]; here it is an error.
pub fn run_markup(
    doc: &MarkupDocument,
    mode: MarkupMode,
    map: &TagMap,
    dummy_text: bool,
    tagger: &Tagger,
) -> Result<PipelineOutput, PipelineError> {
    match mode {
        MarkupMode::Direct => {
            let refs = doc.references(map);
            if refs.is_empty() {
                let mut out = run_markup(doc, MarkupMode::Text, map, dummy_text, tagger)?;
                out.warnings.insert(
                    0,
                    "tag map matched no reference elements; fell back to text extraction".into(),
                );
                return Ok(out);
            }
            Ok(PipelineOutput {
                records: refs
                    .into_iter()
                    .map(|el| RefRecord {
                        page: 1,
                        bbox: None,
                        source: Source::TextOnly,
                        detector: DetectorAttr::Markup,
                        score: None,
                        tagged: doc.tagged(el, map),
                    })
                    .collect(),
                ..Default::default()
            })
        }
        MarkupMode::Text => {
            let text = doc.text_lines(map).join("\n");
            Ok(run_text(&[text], dummy_text, tagger))
        }
        MarkupMode::Layout => Err(PipelineError::InvalidInput(
            "markup layout mode needs the HTML converter; run it through the extractor".into(),
        )),
    }
}
