//! The `refscan` command line.
//!
//! Every subcommand is a thin shell over a library call, and machine-readable
//! outputs use the library formats unchanged. Exit codes: 0 on success, 1
//! when processing fails, 2 for usage and configuration errors.

pub mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use refscan_core::dataset::{load_manifest, split_stats, synth_dataset, DatasetManifest, Layout, Split};
use refscan_core::detector::{detect, load_external_all, write_detections, DetectorConfig};
use refscan_core::evalkit::{ablation_run, ablation_run_manifest, evaluate, AblationPage, AblationTable};
use refscan_core::imgproc::{compose_hybrid, encode_png, load_raster, PreprocessMode};
use refscan_core::pipelines::{allowed_pipelines, Extractor, FileType, JobSpec, Pipeline};

pub use config::CliConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, configuration or arguments: exit code 2.
    #[error("{0}")]
    Usage(String),
    /// The requested work failed: exit code 1.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "refscan", version, about = "Bibliographic reference detection and extraction")]
pub struct Cli {
    /// TOML configuration file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for page-level parallelism (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Validation => Split::Validation,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Json,
    Csv,
}

/// Overrides for the `[detector]` section.
#[derive(Debug, Clone, Default, Args)]
pub struct DetectorFlags {
    #[arg(long)]
    pub column_gap_ratio: Option<f64>,
    #[arg(long)]
    pub line_merge_gap: Option<u32>,
    #[arg(long)]
    pub ref_gap_factor: Option<f64>,
    #[arg(long)]
    pub indent_tolerance: Option<u32>,
    #[arg(long)]
    pub min_score: Option<f64>,
}

impl DetectorFlags {
    /// Applies the flags on top of `base` and validates the result.
    pub fn resolve(&self, base: &DetectorConfig) -> Result<DetectorConfig, CliError> {
        let mut cfg = base.clone();
        if let Some(v) = self.column_gap_ratio {
            cfg.column_gap_ratio = v;
        }
        if let Some(v) = self.line_merge_gap {
            cfg.line_merge_gap = Some(v);
        }
        if let Some(v) = self.ref_gap_factor {
            cfg.ref_gap_factor = v;
        }
        if let Some(v) = self.indent_tolerance {
            cfg.indent_tolerance = v;
        }
        if let Some(v) = self.min_score {
            cfg.min_score = v;
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Writes the hybrid image (`hybrid.png`) and its planes (`plane-0.png` ..
    /// `plane-2.png`) for one page image.
    Preprocess {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// full, dilation-only or none.
        #[arg(long, default_value = "full")]
        mode: PreprocessMode,
    },
    /// Detects references on page images and writes JSON-lines detections.
    Detect {
        /// Page images; the page id is the path as given.
        inputs: Vec<PathBuf>,
        /// Detect on every page of a manifest instead; page ids match it.
        #[arg(long, conflicts_with = "inputs")]
        manifest: Option<PathBuf>,
        #[arg(long, requires = "manifest")]
        split: Option<SplitArg>,
        #[arg(long, default_value = "full")]
        mode: PreprocessMode,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        detector: DetectorFlags,
    },
    /// Scores JSON-lines detections against a manifest.
    Eval {
        detections: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        split: Option<SplitArg>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Runs a document through an extraction pipeline, writing `result.xml`
    /// and overlay images into `--out`.
    Extract {
        file: PathBuf,
        /// Inferred from the extension when absent (PDFs need it).
        #[arg(long)]
        file_type: Option<FileType>,
        /// The first pipeline allowed for the file type when absent.
        #[arg(long)]
        pipeline: Option<Pipeline>,
        /// Prepend placeholder body text before segmentation.
        #[arg(long)]
        dummy_text: bool,
        /// Name of a configured OCR adapter.
        #[arg(long)]
        ocr: Option<String>,
        #[arg(long)]
        mode: Option<PreprocessMode>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        detector: DetectorFlags,
    },
    /// Runs the HTTP job service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Generates a synthetic annotated dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        pages: usize,
        /// Layouts cycled through, e.g. `single,double`.
        #[arg(long, value_delimiter = ',', default_values_t = Layout::ALL.map(|l| LayoutName(l)))]
        layouts: Vec<LayoutName>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluates the detector under each pre-processing mode.
    Ablation {
        /// Dataset to evaluate on.
        #[arg(long, conflicts_with = "synthetic")]
        manifest: Option<PathBuf>,
        #[arg(long, requires = "manifest")]
        split: Option<SplitArg>,
        /// Evaluate on this many in-memory synthetic pages instead.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        #[command(flatten)]
        detector: DetectorFlags,
    },
    /// Prints page and reference counts per layout and split.
    Stats {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

/// A layout as written on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutName(pub Layout);

impl std::str::FromStr for LayoutName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(LayoutName).map_err(|e: refscan_core::dataset::DatasetError| e.to_string())
    }
}

impl std::fmt::Display for LayoutName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self.0 {
            Layout::Single => "single",
            Layout::Double => "double",
            Layout::Triple => "triple",
        })
    }
}

/// File type from the extension; PDFs are ambiguous.
pub fn infer_file_type(path: &Path) -> Result<FileType, CliError> {
    let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).unwrap_or_default();
    match ext.as_str() {
        "png" | "jpg" | "jpeg" | "tif" | "tiff" => Ok(FileType::Image),
        "txt" | "text" => Ok(FileType::Txt),
        "html" | "htm" | "xhtml" => Ok(FileType::Html),
        "xml" => Ok(FileType::Xml),
        "pdf" => Err(CliError::Usage(
            "cannot tell a scanned from a born-digital PDF; pass --file-type".into(),
        )),
        _ => Err(CliError::Usage(format!("cannot infer the file type of {}; pass --file-type", path.display()))),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| failed(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(failed)
}

fn manifest_root(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn load(path: &Path) -> Result<DatasetManifest, CliError> {
    load_manifest(path).map_err(failed)
}

fn format_table(table: &AblationTable, format: Format) -> String {
    match format {
        Format::Table => table.to_string(),
        Format::Json => table.to_json() + "\n",
        Format::Csv => table.to_csv(),
    }
}

/// Runs `cli`, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        cfg.jobs = Some(n);
    }
    if let Some(n) = cfg.jobs {
        cfg.pipeline.jobs = Some(n);
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    match cli.command {
        Command::Preprocess { input, out: dir, mode } => {
            let image = load_raster(&input).map_err(failed)?;
            let hybrid = compose_hybrid(&image, mode).map_err(failed)?;
            write_file(&dir.join("hybrid.png"), &encode_png(hybrid.planes()).map_err(failed)?)?;
            for c in 0..3 {
                let plane = encode_png(&hybrid.channel(c)).map_err(failed)?;
                write_file(&dir.join(format!("plane-{c}.png")), &plane)?;
            }
            let t = hybrid.threshold();
            let summary = serde_json::json!({
                "mode": mode,
                "width": hybrid.width(),
                "height": hybrid.height(),
                "threshold": t.value,
                "degenerate": t.degenerate,
                "distance_saturated": hybrid.distance_saturated(),
            });
            emit(out, &format!("{summary}\n"))
        }
        Command::Detect {
            inputs,
            manifest,
            split,
            mode,
            out: target,
            detector,
        } => {
            let det_cfg = detector.resolve(&cfg.detector)?;
            let pages: Vec<(String, PathBuf)> = match &manifest {
                Some(path) => {
                    let m = load(path)?;
                    let root = manifest_root(path);
                    m.splits
                        .iter()
                        .filter(|(s, _)| split.is_none_or(|want| Split::from(want) == *s))
                        .map(|(_, p)| (p.page_id(), root.join(&p.image_path)))
                        .collect()
                }
                None if inputs.is_empty() => {
                    return Err(CliError::Usage("give page images or --manifest".into()));
                }
                None => inputs.iter().map(|p| (p.to_string_lossy().replace('\\', "/"), p.clone())).collect(),
            };
            use rayon::prelude::*;
            let per_page = pages
                .par_iter()
                .map(|(id, path)| {
                    let image = load_raster(path).map_err(failed)?;
                    let hybrid = compose_hybrid(&image, mode).map_err(failed)?;
                    let dets = detect(&hybrid, &det_cfg).map_err(failed)?;
                    let mut buf = Vec::new();
                    write_detections(&mut buf, id, &dets).map_err(failed)?;
                    Ok(buf)
                })
                .collect::<Result<Vec<Vec<u8>>, CliError>>()?;
            let bytes = per_page.concat();
            match target {
                Some(path) => write_file(&path, &bytes),
                None => out.write_all(&bytes).map_err(failed),
            }
        }
        Command::Eval {
            detections,
            manifest,
            split,
            format,
        } => {
            let m = load(&manifest)?;
            let pages: Vec<_> = m
                .splits
                .iter()
                .filter(|(s, _)| split.is_none_or(|want| Split::from(want) == *s))
                .map(|(_, p)| p)
                .collect();
            let bounds: BTreeMap<String, (u32, u32)> = pages.iter().map(|p| (p.page_id(), (p.width, p.height))).collect();
            let gts: BTreeMap<_, _> = pages.iter().map(|p| (p.page_id(), p.boxes.clone())).collect();
            let dets = load_external_all(&detections, &bounds).map_err(failed)?;
            let report = evaluate(&dets, &gts).map_err(failed)?;
            emit(
                out,
                &match format {
                    Format::Table => report.to_string(),
                    Format::Json => report.to_json() + "\n",
                    Format::Csv => report.to_csv(),
                },
            )
        }
        Command::Extract {
            file,
            file_type,
            pipeline,
            dummy_text,
            ocr,
            mode,
            out: dir,
            detector,
        } => {
            let file_type = match file_type {
                Some(t) => t,
                None => infer_file_type(&file)?,
            };
            let pipeline = pipeline.unwrap_or(allowed_pipelines(file_type)[0]);
            cfg.pipeline.layout.detector = detector.resolve(&cfg.detector)?;
            if let Some(mode) = mode {
                cfg.pipeline.layout.mode = mode;
            }
            let mut spec = JobSpec::new(file, file_type, pipeline);
            spec.dummy_text = dummy_text;
            spec.ocr_adapter = ocr;
            if let Err(errors) = spec.validate(&cfg.pipeline) {
                let lines: Vec<String> = errors.iter().map(ToString::to_string).collect();
                return Err(CliError::Usage(lines.join("\n")));
            }
            let output = Extractor::new(cfg.pipeline).run(&spec).map_err(failed)?;
            for w in &output.result.warnings {
                eprintln!("warning: {w}");
            }
            let written = output.write_to(&dir).map_err(failed)?;
            for path in written {
                emit(out, &format!("{}\n", path.display()))?;
            }
            Ok(())
        }
        Command::Serve { bind, data_dir, workers } => {
            if let Some(b) = bind {
                cfg.service.bind = b;
            }
            if let Some(d) = data_dir {
                cfg.service.data_dir = d;
            }
            if let Some(w) = workers {
                cfg.service.workers = w;
            }
            serve(&cfg, out)
        }
        Command::Synth {
            out: dir,
            pages,
            layouts,
            seed,
        } => {
            let layouts: Vec<Layout> = layouts.into_iter().map(|l| l.0).collect();
            let name = dir.file_name().map_or("synthetic".into(), |n| n.to_string_lossy().into_owned());
            let data = synth_dataset(&name, pages, &layouts, seed).map_err(|e| CliError::Usage(e.to_string()))?;
            let path = data.write(&dir).map_err(failed)?;
            emit(out, &format!("{}\n", path.display()))
        }
        Command::Ablation {
            manifest,
            split,
            synthetic,
            seed,
            format,
            detector,
        } => {
            let det_cfg = detector.resolve(&cfg.detector)?;
            let table = match (manifest, synthetic) {
                (Some(path), _) => {
                    let m = load(&path)?;
                    ablation_run_manifest(&m, manifest_root(&path), split.map(Split::from), &PreprocessMode::ALL, &det_cfg)
                        .map_err(failed)?
                }
                (None, Some(n)) => ablation_run(&synthetic_pages(n, seed)?, &PreprocessMode::ALL, &det_cfg).map_err(failed)?,
                (None, None) => return Err(CliError::Usage("give --manifest or --synthetic".into())),
            };
            emit(out, &format_table(&table, format))
        }
        Command::Stats { manifest, format } => {
            let stats = split_stats(&load(&manifest)?);
            emit(
                out,
                &match format {
                    Format::Json => serde_json::to_string_pretty(&stats).map_err(failed)? + "\n",
                    Format::Table | Format::Csv => stats.to_string(),
                },
            )
        }
    }
}

/// Synthetic ablation pages cycling through all layouts.
pub fn synthetic_pages(n: usize, seed: u64) -> Result<Vec<AblationPage>, CliError> {
    let data = synth_dataset("ablation", n, &Layout::ALL, seed).map_err(failed)?;
    Ok(data
        .pages
        .into_iter()
        .map(|p| AblationPage {
            id: p.page.page_id(),
            ground_truth: p.page.boxes,
            image: p.image,
        })
        .collect())
}

fn serve(cfg: &CliConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(failed)?;
    runtime.block_on(async {
        let listener = refscan_service::bind(&cfg.service.bind).await.map_err(failed)?;
        let local = listener.local_addr().map_err(failed)?;
        let service = refscan_service::Service::start(cfg.service_config()).map_err(failed)?;
        emit(out, &format!("listening on {local}\n"))?;
        out.flush().map_err(failed)?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        refscan_service::serve(service, listener, shutdown).await.map_err(failed)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_types_from_extensions() {
        assert_eq!(infer_file_type(Path::new("a.PNG")).unwrap(), FileType::Image);
        assert_eq!(infer_file_type(Path::new("a.htm")).unwrap(), FileType::Html);
        assert_eq!(infer_file_type(Path::new("a.pdf")).unwrap_err().exit_code(), 2);
        assert!(infer_file_type(Path::new("a")).is_err());
    }

    #[test]
    fn detector_flags_override_and_validate() {
        let flags = DetectorFlags {
            min_score: Some(0.6),
            ..DetectorFlags::default()
        };
        assert_eq!(flags.resolve(&DetectorConfig::default()).unwrap().min_score, 0.6);
        let bad = DetectorFlags {
            column_gap_ratio: Some(2.0),
            ..DetectorFlags::default()
        };
        assert_eq!(bad.resolve(&DetectorConfig::default()).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
