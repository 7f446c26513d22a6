//! Metadata tagging through an external ParsCit- or Grobid-compatible tool.
//!
//! Protocol: the references are written to the tool's stdin, one per line
//! (internal line breaks replaced by spaces). The tool answers on stdout with
//! its native XML, which is recognised by shape:
//!
//! * ParsCit: `citationList/citation` elements with `authors/author`,
//!   `title`, `date`, `journal` or `booktitle`;
//! * Grobid TEI: `biblStruct` elements with `author/persName`,
//!   `title[@level="a"]`, `date/@when`, and `monogr/title`.
//!
//! The answer must contain exactly one entry per input reference, in order.

use serde::{Deserialize, Serialize};

use super::{tag_metadata, Namer, ReferenceString, TaggedReference, MAX_YEAR, MIN_YEAR};
use crate::adapter::{CommandAdapter, CommandConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalTaggerConfig {
    /// Name recorded in the `namer` attribute of tagged references.
    pub name: String,
    pub command: CommandConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggingOutcome {
    pub references: Vec<TaggedReference>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Default)]
struct Fields {
    authors: Vec<String>,
    title: Option<String>,
    year: Option<i32>,
    venue: Option<String>,
}

fn text_of(node: roxmltree::Node) -> String {
    super::normalize_whitespace(
        &node
            .descendants()
            .filter(|n| n.is_text())
            .filter_map(|n| n.text())
            .collect::<Vec<_>>()
            .join(" "),
    )
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| c.tag_name().name() == name)
}

fn non_empty(s: String) -> Option<String> {
    (!s.is_empty()).then_some(s)
}

fn year_in(s: &str) -> Option<i32> {
    let digits: String = s.chars().skip_while(|c| !c.is_ascii_digit()).take(4).collect();
    digits
        .parse::<i32>()
        .ok()
        .filter(|y| digits.len() == 4 && (MIN_YEAR..=MAX_YEAR).contains(y))
}

fn parscit_fields(citation: roxmltree::Node) -> Fields {
    let authors = child(citation, "authors")
        .map(|a| {
            a.children()
                .filter(|c| c.tag_name().name() == "author")
                .map(text_of)
                .filter(|s| !s.is_empty())
                .collect()
        })
        .unwrap_or_default();
    Fields {
        authors,
        title: child(citation, "title").map(text_of).and_then(non_empty),
        year: child(citation, "date").and_then(|d| year_in(&text_of(d))),
        venue: child(citation, "journal")
            .or_else(|| child(citation, "booktitle"))
            .map(text_of)
            .and_then(non_empty),
    }
}

fn grobid_fields(bibl: roxmltree::Node) -> Fields {
    let authors = bibl
        .descendants()
        .filter(|n| n.tag_name().name() == "persName")
        .map(|p| {
            let part = |name| {
                p.children()
                    .filter(|c| c.tag_name().name() == name)
                    .map(text_of)
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let (surname, forename) = (part("surname"), part("forename"));
            match (surname.is_empty(), forename.is_empty()) {
                (false, false) => format!("{surname}, {forename}"),
                (false, true) => surname,
                _ => text_of(p),
            }
        })
        .filter(|s| !s.is_empty())
        .collect();
    let titles: Vec<_> = bibl
        .descendants()
        .filter(|n| n.tag_name().name() == "title")
        .collect();
    let level = |l: &str| titles.iter().find(|t| t.attribute("level") == Some(l)).map(|t| text_of(*t));
    let year = bibl
        .descendants()
        .find(|n| n.tag_name().name() == "date")
        .and_then(|d| d.attribute("when").map(str::to_string).or_else(|| Some(text_of(d))))
        .and_then(|s| year_in(&s));
    Fields {
        authors,
        title: level("a").or_else(|| level("m")).and_then(non_empty),
        year,
        venue: level("j").or_else(|| level("m").filter(|_| level("a").is_some())).and_then(non_empty),
    }
}

/// Parses tool output into one field set per recognised entry.
fn parse_entries(xml: &str) -> Result<Vec<Fields>, String> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| format!("malformed XML: {e}"))?;
    let named = |name: &'static str| {
        doc.descendants()
            .filter(move |n| n.tag_name().name() == name)
            .collect::<Vec<_>>()
    };
    let citations = named("citation");
    if !citations.is_empty() {
        return Ok(citations.into_iter().map(parscit_fields).collect());
    }
    let bibls = named("biblStruct");
    if !bibls.is_empty() {
        return Ok(bibls.into_iter().map(grobid_fields).collect());
    }
    if doc.descendants().any(|n| matches!(n.tag_name().name(), "citationList" | "listBibl")) {
        return Ok(Vec::new());
    }
    Err("output contains neither citation nor biblStruct entries".into())
}

/// Maps tool output onto `refs`; raw strings always come from the input.
pub fn parse_tool_output(
    xml: &str,
    refs: &[ReferenceString],
    tool: &str,
) -> Result<Vec<TaggedReference>, String> {
    let entries = parse_entries(xml)?;
    if entries.len() != refs.len() {
        return Err(format!(
            "tool returned {} entries for {} references",
            entries.len(),
            refs.len()
        ));
    }
    Ok(refs
        .iter()
        .zip(entries)
        .map(|(r, f)| TaggedReference {
            raw: r.raw.clone(),
            authors: f.authors,
            title: f.title,
            year: f.year,
            venue: f.venue,
            namer: Namer::External {
                tool: tool.to_string(),
            },
        })
        .collect())
}

/// Tags `refs` with the external tool; any failure falls back to
/// [`tag_metadata`] for the whole batch and records a warning.
pub fn external_tagger(cfg: &ExternalTaggerConfig, adapter: &CommandAdapter, refs: &[ReferenceString]) -> TaggingOutcome {
    if refs.is_empty() {
        return TaggingOutcome {
            references: Vec::new(),
            warnings: Vec::new(),
        };
    }
    let input: String = refs
        .iter()
        .map(|r| r.normalized() + "\n")
        .collect();
    let result = adapter
        .run(&[], Some(input.as_bytes()))
        .map_err(|e| e.to_string())
        .and_then(|out| String::from_utf8(out).map_err(|e| format!("output is not UTF-8: {e}")))
        .and_then(|xml| parse_tool_output(&xml, refs, &cfg.name));
    match result {
        Ok(references) => TaggingOutcome {
            references,
            warnings: Vec::new(),
        },
        Err(detail) => {
            let warning = format!("external tagger `{}` failed, using rule-based tagger: {detail}", cfg.name);
            log::warn!("{warning}");
            TaggingOutcome {
                references: refs.iter().map(tag_metadata).collect(),
                warnings: vec![warning],
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs() -> Vec<ReferenceString> {
        vec![
            ReferenceString::new("Smith, J. (1999). Title. Journal X.", (0, 1)),
            ReferenceString::new("Doe, A. (2001).\nOther. Review Y.", (1, 3)),
        ]
    }

    fn tagger(program: &str, args: &[&str]) -> (ExternalTaggerConfig, CommandAdapter) {
        let cfg = ExternalTaggerConfig {
            name: "parscit".into(),
            command: CommandConfig::new(program, args),
        };
        let adapter = CommandAdapter::new(cfg.command.clone());
        (cfg, adapter)
    }

    #[test]
    fn echo_stub_maps_raw_passthrough() {
        let script = r#"echo '<algorithm><citationList>'; while IFS= read -r l; do printf '<citation><rawString>%s</rawString><title>%s</title><date>2004</date></citation>\n' "$l" "$l"; done; echo '</citationList></algorithm>'"#;
        let (cfg, adapter) = tagger("sh", &["-c", script]);
        let out = external_tagger(&cfg, &adapter, &refs());
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
        assert_eq!(out.references.len(), 2);
        assert_eq!(out.references[1].raw, "Doe, A. (2001).\nOther. Review Y.");
        assert_eq!(out.references[1].title.as_deref(), Some("Doe, A. (2001). Other. Review Y."));
        assert_eq!(out.references[0].year, Some(2004));
        assert_eq!(out.references[0].namer, Namer::External { tool: "parscit".into() });
    }

    #[test]
    fn unavailable_tool_falls_back() {
        let (cfg, adapter) = tagger("/nonexistent/parscit", &[]);
        let out = external_tagger(&cfg, &adapter, &refs());
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.references, refs().iter().map(tag_metadata).collect::<Vec<_>>());
    }

    #[test]
    fn malformed_payload_falls_back_with_detail() {
        let (cfg, adapter) = tagger("sh", &["-c", "cat >/dev/null; echo '<oops'"]);
        let out = external_tagger(&cfg, &adapter, &refs());
        assert!(out.warnings[0].contains("malformed XML"));
        assert_eq!(out.references[0].namer, Namer::ParscitLike);
    }

    #[test]
    fn grobid_tei() {
        let xml = r#"<TEI xmlns="http://www.tei-c.org/ns/1.0"><listBibl>
          <biblStruct><analytic><title level="a">Deep things</title>
            <author><persName><forename>J</forename><surname>Smith</surname></persName></author></analytic>
            <monogr><title level="j">Journal X</title><imprint><date when="1999-01"/></imprint></monogr></biblStruct>
        </listBibl></TEI>"#;
        let r = [ReferenceString::new("whatever", (0, 1))];
        let t = parse_tool_output(xml, &r, "grobid").unwrap();
        assert_eq!(t[0].authors, ["Smith, J"]);
        assert_eq!(t[0].title.as_deref(), Some("Deep things"));
        assert_eq!(t[0].venue.as_deref(), Some("Journal X"));
        assert_eq!(t[0].year, Some(1999));
        assert!(parse_tool_output(xml, &refs(), "grobid").unwrap_err().contains("1 entries"));
    }
}
