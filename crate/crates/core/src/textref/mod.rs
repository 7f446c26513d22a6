//! Text-based reference extraction: locate the bibliography in plain text,
//! split it into reference strings and tag authors, title, year and venue.
//!
//! The rule-based tagger is the default namer; [`external_tagger`] delegates
//! to a ParsCit- or Grobid-compatible command and falls back to the rules
//! when the tool misbehaves.

mod external;
mod section;
mod segment;
mod tag;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use external::{external_tagger, parse_tool_output, ExternalTaggerConfig, TaggingOutcome};
pub use section::{
    append_dummy_text, find_reference_section, is_reference_heading, SectionRange, DUMMY_TEXT,
    DUMMY_TEXT_VERSION,
};
pub use segment::{segment_references, segment_text, Segmentation};
pub use tag::{tag_metadata, MAX_YEAR, MIN_YEAR};

/// One reference as it appears in the source: its lines joined with `\n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceString {
    pub raw: String,
    /// Half-open line range in the text the reference was segmented from.
    pub line_span: (usize, usize),
}

impl ReferenceString {
    pub fn new(raw: impl Into<String>, line_span: (usize, usize)) -> Self {
        Self {
            raw: raw.into(),
            line_span,
        }
    }

    /// The raw string with line breaks and runs of whitespace collapsed.
    pub fn normalized(&self) -> String {
        normalize_whitespace(&self.raw)
    }
}

pub(crate) fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Which component produced the metadata of a reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Namer {
    ParscitLike,
    External { tool: String },
}

impl Namer {
    pub const PARSCIT_LIKE: &'static str = "parscit-like";

    pub fn as_str(&self) -> &str {
        match self {
            Namer::ParscitLike => Self::PARSCIT_LIKE,
            Namer::External { tool } => tool,
        }
    }
}

impl fmt::Display for Namer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Namer {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(if s == Self::PARSCIT_LIKE {
            Namer::ParscitLike
        } else {
            Namer::External { tool: s.to_string() }
        })
    }
}

impl Serialize for Namer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Namer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedReference {
    /// Verbatim reference text.
    pub raw: String,
    pub authors: Vec<String>,
    pub title: Option<String>,
    pub year: Option<i32>,
    pub venue: Option<String>,
    pub namer: Namer,
}

impl TaggedReference {
    /// A reference with no metadata.
    pub fn untagged(raw: impl Into<String>, namer: Namer) -> Self {
        Self {
            raw: raw.into(),
            authors: Vec::new(),
            title: None,
            year: None,
            venue: None,
            namer,
        }
    }
}
