//! Worker threads that drain the job queue.

use std::any::Any;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use refscan_core::pipelines::{Extractor, JobSpec};

use crate::store::{JobRecord, JobStore, ResultPaths, RunSummary};

/// Executes one job, writing its artifacts into `out_dir`.
pub trait JobRunner: Send + Sync {
    fn run(&self, spec: &JobSpec, out_dir: &Path) -> Result<RunSummary, String>;
}

/// Runs jobs through the extraction pipelines.
#[derive(Debug)]
pub struct ExtractorRunner {
    extractor: Extractor,
}

impl ExtractorRunner {
    pub fn new(extractor: Extractor) -> Self {
        Self { extractor }
    }
}

impl JobRunner for ExtractorRunner {
    fn run(&self, spec: &JobSpec, out_dir: &Path) -> Result<RunSummary, String> {
        let output = self.extractor.run(spec).map_err(|e| e.to_string())?;
        let written = output.write_to(out_dir).map_err(|e| e.to_string())?;
        let names: Vec<String> = written
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect();
        let (xml, overlays) = names.split_first().map_or((None, Vec::new()), |(x, o)| (Some(x.clone()), o.to_vec()));
        Ok(RunSummary {
            result_paths: ResultPaths { xml, overlays },
            timings: output.timings,
            warnings: output.result.warnings,
        })
    }
}

fn panic_message(payload: &(dyn Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Runs a claimed job, turning errors and panics into a failed status.
pub fn execute(store: &JobStore, runner: &dyn JobRunner, job: &JobRecord) {
    let out_dir = store.output_dir(job.id);
    let outcome = match catch_unwind(AssertUnwindSafe(|| runner.run(&job.spec, &out_dir))) {
        Ok(result) => result,
        Err(payload) => Err(format!("pipeline panicked: {}", panic_message(payload.as_ref()))),
    };
    if let Err(e) = &outcome {
        tracing::warn!(job = %job.id, error = %e, "job failed");
    }
    if let Err(e) = store.finish(job.id, outcome) {
        tracing::error!(job = %job.id, error = %e, "could not record job outcome");
    }
}

/// A fixed set of worker threads.
pub struct WorkerPool {
    stop: Arc<AtomicBool>,
    store: Arc<JobStore>,
    handles: Vec<JoinHandle<()>>,
}

impl WorkerPool {
    pub fn start(store: Arc<JobStore>, runner: Arc<dyn JobRunner>, size: usize) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let handles = (0..size.max(1))
            .map(|i| {
                let (store, runner, stop) = (Arc::clone(&store), Arc::clone(&runner), Arc::clone(&stop));
                std::thread::Builder::new()
                    .name(format!("refscan-worker-{i}"))
                    .spawn(move || {
                        while !stop.load(Ordering::Acquire) {
                            match store.claim(Duration::from_millis(500)) {
                                Ok(Some(job)) => execute(&store, runner.as_ref(), &job),
                                Ok(None) => {}
                                Err(e) => {
                                    tracing::error!(error = %e, "claim failed");
                                    std::thread::sleep(Duration::from_millis(200));
                                }
                            }
                        }
                    })
                    .expect("spawn worker thread")
            })
            .collect();
        Self { stop, store, handles }
    }

    pub fn size(&self) -> usize {
        self.handles.len()
    }

    /// Stops claiming new jobs and waits for running ones to finish.
    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.stop.store(true, Ordering::Release);
        self.store.close();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

impl Drop for WorkerPool {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}
