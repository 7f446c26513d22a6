//! Job execution: load the input, run the routed pipelines, emit outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::markup::{parse_markup, run_markup, MarkupKind, MarkupMode, TagMap};
use super::{
    emit_xml, ensemble_merge, render_overlay, run_layout, run_text, CommandOcr, ExtractionResult, FileType, JobSpec,
    LayoutOptions, OcrEngine, Pipeline, PipelineError, PipelineOutput, Tagger,
};
use crate::adapter::{AdapterPool, CommandAdapter, CommandConfig};
use crate::imgproc::{encode_png, load_raster, rasterize_pdf, RasterImage, RasterizerConfig};
use crate::textref::ExternalTaggerConfig;

/// Wall-clock seconds per phase, summed over pages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub preprocess: f64,
    pub detect: f64,
    pub ocr: f64,
    pub segment: f64,
    pub emit: f64,
}

impl PhaseTimings {
    pub fn add(&mut self, other: &PhaseTimings) {
        self.preprocess += other.preprocess;
        self.detect += other.detect;
        self.ocr += other.ocr;
        self.segment += other.segment;
        self.emit += other.emit;
    }
}

fn default_ocr() -> BTreeMap<String, CommandConfig> {
    BTreeMap::from([("tesseract".to_string(), CommandOcr::tesseract_config())])
}

fn default_pool() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get())
}

/// Adapter and pipeline settings shared by all jobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub layout: LayoutOptions,
    pub rasterizer: RasterizerConfig,
    /// Text extraction for born-digital PDFs; receives `{input}` and prints
    /// the text with pages separated by form feeds.
    pub pdf_text: CommandConfig,
    /// HTML to PDF conversion; receives `{input}` and `{output}`.
    pub html_to_pdf: CommandConfig,
    /// Named OCR adapters, each receiving `{input}` (a PNG).
    pub ocr: BTreeMap<String, CommandConfig>,
    pub default_ocr: String,
    /// External metadata tagger; the rule-based tagger when absent.
    pub tagger: Option<ExternalTaggerConfig>,
    pub tag_map: TagMap,
    /// Maximum number of adapter processes running at once.
    pub adapter_pool: usize,
    /// Worker threads for page-level parallelism; all cores when absent.
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            layout: LayoutOptions::default(),
            rasterizer: RasterizerConfig::default(),
            pdf_text: CommandConfig::new("pdftotext", &["-layout", "{input}", "-"]),
            html_to_pdf: CommandConfig::new("wkhtmltopdf", &["--quiet", "{input}", "{output}"]),
            ocr: default_ocr(),
            default_ocr: "tesseract".into(),
            tagger: None,
            tag_map: TagMap::default(),
            adapter_pool: default_pool(),
            jobs: None,
        }
    }
}

/// Everything a job produces.
#[derive(Debug, Clone)]
pub struct JobOutput {
    pub result: ExtractionResult,
    /// The emitted XML document.
    pub xml: Vec<u8>,
    /// One overlay per page image; empty for text and markup inputs.
    pub overlays: Vec<RasterImage>,
    pub timings: PhaseTimings,
}

pub const RESULT_FILE: &str = "result.xml";

pub fn overlay_file_name(page: u32) -> String {
    format!("overlay-{page}.png")
}

/// Writes `bytes` through a temporary sibling and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

impl JobOutput {
    /// Writes `result.xml` and `overlay-<n>.png` into `dir`, returning the
    /// paths written. Rewriting the same output is harmless.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| PipelineError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        let xml_path = dir.join(RESULT_FILE);
        write_atomic(&xml_path, &self.xml).map_err(io(&xml_path))?;
        written.push(xml_path);
        for (i, overlay) in self.overlays.iter().enumerate() {
            let path = dir.join(overlay_file_name(i as u32 + 1));
            write_atomic(&path, &encode_png(overlay)?).map_err(io(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Runs jobs with a fixed configuration.
pub struct Extractor {
    config: PipelineConfig,
    pool: Arc<AdapterPool>,
    ocr_override: Option<Arc<dyn OcrEngine>>,
    threads: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Extractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Extractor").field("config", &self.config).finish_non_exhaustive()
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, PipelineError> {
    std::fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn decode_text(bytes: Vec<u8>, path: &Path, warnings: &mut Vec<String>) -> String {
    String::from_utf8(bytes).unwrap_or_else(|e| {
        warnings.push(format!("{} is not valid UTF-8; invalid bytes were replaced", path.display()));
        String::from_utf8_lossy(e.as_bytes()).into_owned()
    })
}

impl Extractor {
    pub fn new(config: PipelineConfig) -> Self {
        let threads = config.jobs.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok());
        Self {
            pool: AdapterPool::new(config.adapter_pool),
            config,
            ocr_override: None,
            threads,
        }
    }

    /// Uses `engine` for every OCR request instead of the configured adapters.
    pub fn with_ocr(mut self, engine: Arc<dyn OcrEngine>) -> Self {
        self.ocr_override = Some(engine);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn ocr_engine(&self, spec: &JobSpec) -> Arc<dyn OcrEngine> {
        if let Some(engine) = &self.ocr_override {
            return Arc::clone(engine);
        }
        let name = spec.ocr_adapter.as_deref().unwrap_or(&self.config.default_ocr);
        let cfg = self
            .config
            .ocr
            .get(name)
            .cloned()
            .unwrap_or_else(|| CommandConfig::new(name, &["{input}"]));
        Arc::new(CommandOcr::new(name, cfg).with_pool(Arc::clone(&self.pool)))
    }

    fn tagger(&self) -> Tagger {
        match &self.config.tagger {
            Some(cfg) => Tagger::External {
                config: cfg.clone(),
                adapter: CommandAdapter::new(cfg.command.clone()).with_pool(Arc::clone(&self.pool)),
            },
            None => Tagger::Rules,
        }
    }

    fn adapter(&self, cfg: &CommandConfig) -> CommandAdapter {
        CommandAdapter::new(cfg.clone()).with_pool(Arc::clone(&self.pool))
    }

    /// Validates and runs `spec`.
    pub fn run(&self, spec: &JobSpec) -> Result<JobOutput, PipelineError> {
        spec.validate(&self.config).map_err(PipelineError::Spec)?;
        match &self.threads {
            Some(pool) => pool.install(|| self.run_validated(spec)),
            None => self.run_validated(spec),
        }
    }

    fn page_texts_by_ocr(&self, pages: &[RasterImage], ocr: &dyn OcrEngine, out: &mut PipelineOutput) -> Vec<String> {
        let t = Instant::now();
        let texts = pages
            .iter()
            .enumerate()
            .map(|(i, p)| {
                ocr.recognize(i, p, None).unwrap_or_else(|e| {
                    out.warnings.push(format!("page {}: OCR failed: {e}", i + 1));
                    String::new()
                })
            })
            .collect();
        out.timings.ocr += t.elapsed().as_secs_f64();
        texts
    }

    fn pdf_text(&self, path: &Path, out: &mut PipelineOutput) -> Result<Vec<String>, PipelineError> {
        let t = Instant::now();
        let bytes = self.adapter(&self.config.pdf_text).run(&[("input", &path.to_string_lossy())], None)?;
        out.timings.ocr += t.elapsed().as_secs_f64();
        let text = decode_text(bytes, path, &mut out.warnings);
        Ok(text.split('\u{c}').map(str::to_string).collect())
    }

    fn html_pages(&self, path: &Path) -> Result<Vec<RasterImage>, PipelineError> {
        let scratch = tempfile::tempdir().map_err(|source| PipelineError::Io {
            path: std::env::temp_dir(),
            source,
        })?;
        let pdf = scratch.path().join("document.pdf");
        self.adapter(&self.config.html_to_pdf).run(
            &[("input", &path.to_string_lossy()), ("output", &pdf.to_string_lossy())],
            None,
        )?;
        Ok(rasterize_pdf(&pdf, &self.config.rasterizer)?)
    }

    fn run_validated(&self, spec: &JobSpec) -> Result<JobOutput, PipelineError> {
        let layout_opts = LayoutOptions {
            detector: spec.detector.clone().unwrap_or_else(|| self.config.layout.detector.clone()),
            mode: self.config.layout.mode,
        };
        let tagger = self.tagger();
        let mut out = PipelineOutput::default();
        let mut images: Vec<RasterImage> = Vec::new();
        let path = spec.file.as_path();

        let needs_images = matches!(spec.pipeline, Pipeline::Layout | Pipeline::Both)
            || (spec.pipeline == Pipeline::Text && matches!(spec.file_type, FileType::Image | FileType::ScannedPdf));
        if needs_images {
            let t = Instant::now();
            images = match spec.file_type {
                FileType::Image => vec![load_raster(path)?],
                _ => rasterize_pdf(path, &self.config.rasterizer)?,
            };
            out.timings.preprocess += t.elapsed().as_secs_f64();
        }

        let mut pages = images.len().max(1) as u32;
        let mut records = match (spec.file_type, spec.pipeline) {
            (FileType::Txt, _) => {
                let text = decode_text(read_file(path)?, path, &mut out.warnings);
                self.absorb(&mut out, run_text(&[text], spec.dummy_text, &tagger))
            }
            (FileType::Html | FileType::Xml, p) => {
                let kind = if spec.file_type == FileType::Html { MarkupKind::Html } else { MarkupKind::Xml };
                let source = decode_text(read_file(path)?, path, &mut out.warnings);
                let doc = parse_markup(&source, kind)?;
                let map = &self.config.tag_map;
                match p {
                    Pipeline::MarkupDirect | Pipeline::MarkupText => {
                        let mode = if p == Pipeline::MarkupDirect { MarkupMode::Direct } else { MarkupMode::Text };
                        let r = run_markup(&doc, mode, map, spec.dummy_text, &tagger)?;
                        self.absorb(&mut out, r)
                    }
                    _ => {
                        let t = Instant::now();
                        images = self.html_pages(path)?;
                        out.timings.preprocess += t.elapsed().as_secs_f64();
                        pages = images.len() as u32;
                        let ocr = self.ocr_engine(spec);
                        let layout = run_layout(&images, &layout_opts, ocr.as_ref(), &tagger)?;
                        let layout = self.absorb(&mut out, layout);
                        let text = run_markup(&doc, MarkupMode::Text, map, spec.dummy_text, &tagger)?;
                        let text = self.absorb(&mut out, text);
                        ensemble_merge(layout, text)
                    }
                }
            }
            (_, Pipeline::Layout) => {
                let ocr = self.ocr_engine(spec);
                let r = run_layout(&images, &layout_opts, ocr.as_ref(), &tagger)?;
                self.absorb(&mut out, r)
            }
            (ft, Pipeline::Text | Pipeline::Both) => {
                let ocr = self.ocr_engine(spec);
                let layout = if spec.pipeline == Pipeline::Both {
                    if ft == FileType::BornDigitalPdf {
                        let t = Instant::now();
                        images = rasterize_pdf(path, &self.config.rasterizer)?;
                        out.timings.preprocess += t.elapsed().as_secs_f64();
                        pages = images.len() as u32;
                    }
                    let r = run_layout(&images, &layout_opts, ocr.as_ref(), &tagger)?;
                    Some(self.absorb(&mut out, r))
                } else {
                    None
                };
                let texts = if ft == FileType::BornDigitalPdf {
                    let texts = self.pdf_text(path, &mut out)?;
                    pages = pages.max(texts.iter().filter(|t| !t.trim().is_empty()).count() as u32).max(1);
                    texts
                } else {
                    self.page_texts_by_ocr(&images, ocr.as_ref(), &mut out)
                };
                let text = self.absorb(&mut out, run_text(&texts, spec.dummy_text, &tagger));
                match layout {
                    Some(layout) => ensemble_merge(layout, text),
                    None => text,
                }
            }
            (_, p) => unreachable!("pipeline {p} passed validation"),
        };
        for r in &mut records {
            r.page = r.page.min(pages);
        }

        let t = Instant::now();
        let result = ExtractionResult {
            pages,
            records,
            warnings: out.warnings,
        }
        .canonicalized();
        let xml = emit_xml(&result);
        let overlays = images
            .iter()
            .enumerate()
            .map(|(i, img)| {
                let on_page: Vec<_> = result.records_on_page(i as u32 + 1).cloned().collect();
                render_overlay(img, &on_page)
            })
            .collect();
        out.timings.emit += t.elapsed().as_secs_f64();
        Ok(JobOutput {
            result,
            xml,
            overlays,
            timings: out.timings,
        })
    }

    /// Moves warnings and timings of a pipeline run into `out`.
    fn absorb(&self, out: &mut PipelineOutput, run: PipelineOutput) -> Vec<super::RefRecord> {
        out.warnings.extend(run.warnings);
        out.timings.add(&run.timings);
        run.records
    }
}
