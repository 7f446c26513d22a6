//! Job records and the persistent queue.
//!
//! Every job lives in its own directory under `<data_dir>/jobs/<id>/`:
//! `job.json` holds the record, `input/` the upload and `output/` the
//! artifacts. Records are rewritten atomically on every transition, all
//! transitions happen under one lock, and workers take jobs with
//! [`JobStore::claim`], which hands each queued job to exactly one caller.

use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use refscan_core::pipelines::{write_atomic, JobSpec, PhaseTimings};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::ServiceError;

pub const RECORD_FILE: &str = "job.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Processing,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

/// Artifact file names, relative to the job's output directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultPaths {
    pub xml: Option<String>,
    pub overlays: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: Uuid,
    pub owner: String,
    /// Submission order; the queue is FIFO over it.
    pub seq: u64,
    pub spec: JobSpec,
    pub status: JobStatus,
    /// Milliseconds since the Unix epoch.
    pub submitted_at: u64,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    pub error: Option<String>,
    pub result_paths: ResultPaths,
    pub timings: Option<PhaseTimings>,
    pub warnings: Vec<String>,
    /// How many times a worker has picked the job up; above 1 only after a
    /// restart interrupted processing.
    pub attempts: u32,
}

/// What a finished run reports back to the store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub result_paths: ResultPaths,
    pub timings: PhaseTimings,
    pub warnings: Vec<String>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Default)]
struct State {
    jobs: BTreeMap<Uuid, JobRecord>,
    queue: VecDeque<Uuid>,
    next_seq: u64,
    closed: bool,
}

#[derive(Debug)]
pub struct JobStore {
    root: PathBuf,
    state: Mutex<State>,
    changed: Condvar,
}

impl JobStore {
    /// Opens (or creates) the store under `data_dir`. Jobs that were
    /// processing when the previous run stopped go back to the queue.
    pub fn open(data_dir: &Path) -> Result<Self, ServiceError> {
        let root = data_dir.join("jobs");
        std::fs::create_dir_all(&root).map_err(ServiceError::io(&root))?;
        let mut state = State::default();
        let entries = std::fs::read_dir(&root).map_err(ServiceError::io(&root))?;
        for entry in entries {
            let dir = entry.map_err(ServiceError::io(&root))?.path();
            let path = dir.join(RECORD_FILE);
            if !path.is_file() {
                continue;
            }
            let bytes = std::fs::read(&path).map_err(ServiceError::io(&path))?;
            let mut record: JobRecord =
                serde_json::from_slice(&bytes).map_err(|e| ServiceError::Corrupt { path: path.clone(), detail: e.to_string() })?;
            if record.status == JobStatus::Processing {
                tracing::warn!(job = %record.id, "job was interrupted, re-queueing");
                record.status = JobStatus::Queued;
                record.started_at = None;
                persist(&root, &record)?;
            }
            state.next_seq = state.next_seq.max(record.seq + 1);
            state.jobs.insert(record.id, record);
        }
        let mut queued: Vec<&JobRecord> = state.jobs.values().filter(|r| r.status == JobStatus::Queued).collect();
        queued.sort_by_key(|r| r.seq);
        state.queue = queued.into_iter().map(|r| r.id).collect();
        Ok(Self {
            root,
            state: Mutex::new(state),
            changed: Condvar::new(),
        })
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        // A panic while holding the lock cannot leave a half-applied
        // transition: records are only swapped in after persisting.
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn job_dir(&self, id: Uuid) -> PathBuf {
        self.root.join(id.to_string())
    }

    pub fn input_dir(&self, id: Uuid) -> PathBuf {
        self.job_dir(id).join("input")
    }

    pub fn output_dir(&self, id: Uuid) -> PathBuf {
        self.job_dir(id).join("output")
    }

    /// Reserves an id and creates the job's input directory. The job is not
    /// visible until [`JobStore::enqueue`].
    pub fn reserve(&self) -> Result<Uuid, ServiceError> {
        let id = Uuid::new_v4();
        let dir = self.input_dir(id);
        std::fs::create_dir_all(&dir).map_err(ServiceError::io(&dir))?;
        Ok(id)
    }

    /// Persists a queued job and wakes one worker.
    pub fn enqueue(&self, id: Uuid, owner: &str, spec: JobSpec) -> Result<JobRecord, ServiceError> {
        let mut state = self.lock();
        let record = JobRecord {
            id,
            owner: owner.to_string(),
            seq: state.next_seq,
            spec,
            status: JobStatus::Queued,
            submitted_at: now_ms(),
            started_at: None,
            finished_at: None,
            error: None,
            result_paths: ResultPaths::default(),
            timings: None,
            warnings: Vec::new(),
            attempts: 0,
        };
        persist(&self.root, &record)?;
        state.next_seq += 1;
        state.jobs.insert(id, record.clone());
        state.queue.push_back(id);
        drop(state);
        self.changed.notify_all();
        Ok(record)
    }

    /// Takes the oldest queued job and marks it processing, waiting up to
    /// `timeout` for one to arrive. Returns `None` on timeout or after
    /// [`JobStore::close`].
    pub fn claim(&self, timeout: Duration) -> Result<Option<JobRecord>, ServiceError> {
        let deadline = Instant::now() + timeout;
        let mut state = self.lock();
        loop {
            if state.closed {
                return Ok(None);
            }
            if let Some(id) = state.queue.pop_front() {
                let mut record = state.jobs[&id].clone();
                record.status = JobStatus::Processing;
                record.started_at = Some(now_ms().max(record.submitted_at));
                record.attempts += 1;
                if let Err(e) = persist(&self.root, &record) {
                    state.queue.push_front(id);
                    return Err(e);
                }
                state.jobs.insert(id, record.clone());
                return Ok(Some(record));
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            state = self.changed.wait_timeout(state, left).unwrap_or_else(|e| e.into_inner()).0;
        }
    }

    /// Moves a processing job to done or failed.
    pub fn finish(&self, id: Uuid, outcome: Result<RunSummary, String>) -> Result<JobRecord, ServiceError> {
        let mut state = self.lock();
        let Some(current) = state.jobs.get(&id) else {
            return Err(ServiceError::Transition { id, detail: "unknown job".into() });
        };
        if current.status != JobStatus::Processing {
            return Err(ServiceError::Transition {
                id,
                detail: format!("cannot finish a {:?} job", current.status),
            });
        }
        let mut record = current.clone();
        record.finished_at = Some(now_ms().max(record.started_at.unwrap_or(record.submitted_at)));
        match outcome {
            Ok(summary) => {
                record.status = JobStatus::Done;
                record.result_paths = summary.result_paths;
                record.timings = Some(summary.timings);
                record.warnings = summary.warnings;
            }
            Err(message) => {
                record.status = JobStatus::Failed;
                record.error = Some(message);
            }
        }
        persist(&self.root, &record)?;
        state.jobs.insert(id, record.clone());
        drop(state);
        self.changed.notify_all();
        Ok(record)
    }

    pub fn get(&self, id: Uuid) -> Option<JobRecord> {
        self.lock().jobs.get(&id).cloned()
    }

    /// The job, if `owner` owns it.
    pub fn get_owned(&self, id: Uuid, owner: &str) -> Option<JobRecord> {
        self.get(id).filter(|r| r.owner == owner)
    }

    /// `owner`'s jobs, newest first.
    pub fn list(&self, owner: &str) -> Vec<JobRecord> {
        let state = self.lock();
        let mut jobs: Vec<JobRecord> = state.jobs.values().filter(|r| r.owner == owner).cloned().collect();
        jobs.sort_by_key(|r| std::cmp::Reverse(r.seq));
        jobs
    }

    pub fn queued(&self) -> usize {
        self.lock().queue.len()
    }

    /// Waits until no job is queued or processing. Returns false on timeout.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut state = self.lock();
        loop {
            if state.jobs.values().all(|r| r.status.is_terminal()) {
                return true;
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return false;
            }
            state = self.changed.wait_timeout(state, left).unwrap_or_else(|e| e.into_inner()).0;
        }
    }

    /// Wakes all waiting workers and makes further claims return `None`.
    pub fn close(&self) {
        self.lock().closed = true;
        self.changed.notify_all();
    }
}

fn persist(root: &Path, record: &JobRecord) -> Result<(), ServiceError> {
    let dir = root.join(record.id.to_string());
    std::fs::create_dir_all(&dir).map_err(ServiceError::io(&dir))?;
    let path = dir.join(RECORD_FILE);
    let bytes = serde_json::to_vec_pretty(record).expect("job records serialize");
    write_atomic(&path, &bytes).map_err(ServiceError::io(&path))
}
