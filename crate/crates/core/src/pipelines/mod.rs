//! Document-level orchestration: route a file through the layout, text or
//! markup pipelines, merge their references and write XML plus overlays.
//!
//! The routing table ([`allowed_pipelines`]) decides which pipelines a file
//! type supports; [`JobSpec::validate`] rejects everything else before any
//! work starts. [`Extractor`] owns the adapter configuration and runs jobs.

mod ensemble;
mod layout;
mod markup;
mod ocr;
mod overlay;
mod run;
mod schema;
mod text;
mod xml;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{AdapterError, CommandAdapter};
use crate::dataset::RefBox;
use crate::detector::DetectError;
use crate::imgproc::ImageError;
use crate::textref::{external_tagger, tag_metadata, ExternalTaggerConfig, ReferenceString, TaggedReference, TaggingOutcome};

pub use ensemble::{ensemble_merge, pair_records, token_jaccard, Similarity, PAIRING_THRESHOLD};
pub use layout::{run_layout, LayoutOptions};
pub use markup::{parse_markup, run_markup, MarkupDocument, MarkupKind, MarkupMode, TagMap, TAG_MAP_NAMER};
pub use ocr::{CommandOcr, OcrEngine, OcrError, ScriptedOcr, ScriptedPage};
pub use overlay::{render_overlay, source_color, OUTLINE_WIDTH, COLOR_BOTH, COLOR_LAYOUT_ONLY, COLOR_TEXT_ONLY};
pub use run::{overlay_file_name, write_atomic, Extractor, JobOutput, PhaseTimings, PipelineConfig, RESULT_FILE};
pub use text::run_text;
pub use xml::{emit_xml, parse_xml, validate_xml, XmlError, GENERATOR, SCHEMA_XSD};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid job spec: {}", format_field_errors(.0))]
    Spec(Vec<FieldError>),
    #[error("{0}")]
    InvalidInput(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("markup: {0}")]
    Markup(String),
}

fn format_field_errors(errors: &[FieldError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FileType {
    ScannedPdf,
    Image,
    BornDigitalPdf,
    Txt,
    Html,
    Xml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Layout,
    Text,
    Both,
    MarkupDirect,
    MarkupText,
    MarkupLayout,
}

macro_rules! kebab_names {
    ($ty:ident { $($variant:ident => $name:literal),* $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),*
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($ty::$variant),)*
                    _ => Err(format!(
                        "unknown {} `{s}` (expected one of: {})",
                        stringify!($ty),
                        [$($name),*].join(", ")
                    )),
                }
            }
        }
    };
}

kebab_names!(FileType {
    ScannedPdf => "scanned-pdf",
    Image => "image",
    BornDigitalPdf => "born-digital-pdf",
    Txt => "txt",
    Html => "html",
    Xml => "xml",
});

kebab_names!(Pipeline {
    Layout => "layout",
    Text => "text",
    Both => "both",
    MarkupDirect => "markup-direct",
    MarkupText => "markup-text",
    MarkupLayout => "markup-layout",
});

/// Pipelines available for a file type.
pub fn allowed_pipelines(file_type: FileType) -> &'static [Pipeline] {
    use Pipeline::*;
    match file_type {
        FileType::ScannedPdf | FileType::Image | FileType::BornDigitalPdf => &[Layout, Text, Both],
        FileType::Txt => &[Text],
        FileType::Html => &[MarkupDirect, MarkupText, MarkupLayout],
        FileType::Xml => &[MarkupDirect, MarkupText],
    }
}

pub fn is_routable(file_type: FileType, pipeline: Pipeline) -> bool {
    allowed_pipelines(file_type).contains(&pipeline)
}

/// A validation failure tied to one job spec field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// One extraction request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    #[serde(default)]
    pub file: PathBuf,
    pub file_type: FileType,
    pub pipeline: Pipeline,
    #[serde(default)]
    pub dummy_text: bool,
    /// Overrides the configured detector settings for this job.
    #[serde(default)]
    pub detector: Option<crate::detector::DetectorConfig>,
    /// Name of a configured OCR adapter; the configured default when absent.
    #[serde(default)]
    pub ocr_adapter: Option<String>,
}

impl JobSpec {
    pub fn new(file: impl Into<PathBuf>, file_type: FileType, pipeline: Pipeline) -> Self {
        Self {
            file: file.into(),
            file_type,
            pipeline,
            dummy_text: false,
            detector: None,
            ocr_adapter: None,
        }
    }

    /// Checks the job spec against the routing table and the adapter
    /// configuration. Every problem is reported, not just the first.
    pub fn validate(&self, cfg: &PipelineConfig) -> Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        if self.file.as_os_str().is_empty() {
            errors.push(FieldError::new("file", "no input file"));
        }
        if !is_routable(self.file_type, self.pipeline) {
            let allowed: Vec<&str> = allowed_pipelines(self.file_type).iter().map(|p| p.as_str()).collect();
            errors.push(FieldError::new(
                "pipeline",
                format!(
                    "`{}` is not available for file type `{}` (available: {})",
                    self.pipeline,
                    self.file_type,
                    allowed.join(", ")
                ),
            ));
        }
        if let Some(det) = &self.detector {
            if let Err(e) = det.validate() {
                errors.push(FieldError::new("detector", e.to_string()));
            }
        }
        if let Some(name) = &self.ocr_adapter {
            if !cfg.ocr.contains_key(name) {
                errors.push(FieldError::new("ocr_adapter", format!("no OCR adapter named `{name}` is configured")));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// Which pipelines found a reference. Drives the overlay colour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    LayoutOnly,
    TextOnly,
    Both,
}

kebab_names!(Source {
    LayoutOnly => "layout-only",
    TextOnly => "text-only",
    Both => "both",
});

/// Value of the `detector` attribute in the XML output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorAttr {
    #[serde(rename = "layout")]
    Layout,
    #[serde(rename = "text")]
    Text,
    #[serde(rename = "markup")]
    Markup,
    #[serde(rename = "layout+text")]
    LayoutText,
}

kebab_names!(DetectorAttr {
    Layout => "layout",
    Text => "text",
    Markup => "markup",
    LayoutText => "layout+text",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefRecord {
    /// 1-based page number.
    pub page: u32,
    #[serde(rename = "box")]
    pub bbox: Option<RefBox>,
    pub source: Source,
    pub detector: DetectorAttr,
    /// Detection confidence for layout records.
    pub score: Option<f64>,
    pub tagged: TaggedReference,
}

impl RefRecord {
    pub fn raw(&self) -> &str {
        &self.tagged.raw
    }

    /// Value of the `namer` attribute.
    pub fn namer(&self) -> &str {
        self.tagged.namer.as_str()
    }
}

/// Records and warnings of one document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtractionResult {
    /// Page count of the document; text-only inputs count as one page.
    pub pages: u32,
    pub records: Vec<RefRecord>,
    pub warnings: Vec<String>,
}

impl ExtractionResult {
    /// Orders records by page, keeping reading order within a page.
    pub fn canonicalize(&mut self) {
        self.records.sort_by_key(|r| r.page);
    }

    pub fn canonicalized(mut self) -> Self {
        self.canonicalize();
        self
    }

    pub fn records_on_page(&self, page: u32) -> impl Iterator<Item = &RefRecord> {
        self.records.iter().filter(move |r| r.page == page)
    }

    /// Records pointing at pages outside `1..=pages`.
    pub fn check_pages(&self) -> Result<(), String> {
        match self.records.iter().find(|r| r.page == 0 || r.page > self.pages) {
            Some(r) => Err(format!("record on page {} but the document has {} pages", r.page, self.pages)),
            None => Ok(()),
        }
    }
}

/// Output of a single pipeline run.
#[derive(Debug, Clone, Default)]
pub struct PipelineOutput {
    pub records: Vec<RefRecord>,
    pub warnings: Vec<String>,
    pub timings: PhaseTimings,
}

/// Metadata tagger used for reference strings.
#[derive(Debug, Clone, Default)]
pub enum Tagger {
    #[default]
    Rules,
    External {
        config: ExternalTaggerConfig,
        adapter: CommandAdapter,
    },
}

impl Tagger {
    pub fn external(config: ExternalTaggerConfig) -> Self {
        let adapter = CommandAdapter::new(config.command.clone());
        Tagger::External { config, adapter }
    }

    pub fn tag(&self, refs: &[ReferenceString]) -> TaggingOutcome {
        match self {
            Tagger::Rules => TaggingOutcome {
                references: refs.iter().map(tag_metadata).collect(),
                warnings: Vec::new(),
            },
            Tagger::External { config, adapter } => external_tagger(config, adapter, refs),
        }
    }
}
