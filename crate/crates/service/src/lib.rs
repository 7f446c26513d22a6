//! HTTP job service for refscan.
//!
//! Users log in, upload a document with a [`JobSpec`](refscan_core::pipelines::JobSpec),
//! and poll for the XML and overlay images. Jobs are queued FIFO and run by a
//! fixed pool of worker threads; records and artifacts persist under the
//! data directory, so a restart resumes the queue. See [`api`] for the routes.

pub mod api;
pub mod auth;
mod config;
pub mod store;
pub mod worker;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use refscan_core::pipelines::Extractor;
use uuid::Uuid;

pub use api::{router, AppState};
pub use config::ServiceConfig;
pub use store::{JobRecord, JobStatus, JobStore, ResultPaths, RunSummary};
pub use worker::{ExtractorRunner, JobRunner, WorkerPool};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt job record {}: {detail}", path.display())]
    Corrupt { path: PathBuf, detail: String },
    #[error("job {id}: {detail}")]
    Transition { id: Uuid, detail: String },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}

impl ServiceError {
    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ServiceError {
        let path = path.to_path_buf();
        move |source| ServiceError::Io { path, source }
    }
}

/// A running service: the store, the sessions and the worker pool.
pub struct Service {
    state: Arc<AppState>,
    workers: WorkerPool,
    max_upload_bytes: usize,
}

impl Service {
    /// Opens the store and starts `config.workers` workers running jobs
    /// through the extraction pipelines.
    pub fn start(config: ServiceConfig) -> Result<Self, ServiceError> {
        let runner = Arc::new(ExtractorRunner::new(Extractor::new(config.pipeline.clone())));
        Self::with_runner(config, runner)
    }

    pub fn with_runner(config: ServiceConfig, runner: Arc<dyn JobRunner>) -> Result<Self, ServiceError> {
        if config.users.is_empty() {
            tracing::warn!("no users configured; nobody can log in");
        }
        let store = Arc::new(JobStore::open(&config.data_dir)?);
        let workers = WorkerPool::start(Arc::clone(&store), runner, config.workers);
        let state = Arc::new(AppState {
            store,
            sessions: auth::Sessions::new(config.users),
            pipeline: config.pipeline,
        });
        Ok(Self {
            state,
            workers,
            max_upload_bytes: config.max_upload_bytes,
        })
    }

    pub fn router(&self) -> axum::Router {
        router(Arc::clone(&self.state), self.max_upload_bytes)
    }

    pub fn store(&self) -> &JobStore {
        &self.state.store
    }

    pub fn workers(&self) -> usize {
        self.workers.size()
    }

    /// Finishes running jobs and stops the workers.
    pub fn shutdown(self) {
        self.workers.shutdown();
    }
}

/// Binds the listening socket; a port already in use is a [`ServiceError::Bind`].
pub async fn bind(addr: &str) -> Result<tokio::net::TcpListener, ServiceError> {
    tokio::net::TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind {
        addr: addr.to_string(),
        source,
    })
}

/// Serves on `listener` until `shutdown` resolves, then stops the workers.
pub async fn serve(
    service: Service,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let local = listener.local_addr().map_err(|source| ServiceError::Bind {
        addr: "listener".into(),
        source,
    })?;
    tracing::info!(%local, workers = service.workers(), "listening");
    let result = axum::serve(listener, service.router())
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|source| ServiceError::Io {
            path: PathBuf::from(local.to_string()),
            source,
        });
    tokio::task::spawn_blocking(move || service.shutdown()).await.ok();
    result
}
