//! External-command adapters: OCR engines, PDF rasterizers, converters and
//! citation taggers all run as child processes behind this interface.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter `{program}` could not be started: {source}")]
    Unavailable {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("adapter `{program}` timed out after {timeout_ms} ms")]
    Timeout { program: String, timeout_ms: u64 },
    #[error("adapter `{program}` exited with {status}: {stderr}")]
    Failed {
        program: String,
        status: String,
        stderr: String,
    },
    #[error("adapter `{program}` produced malformed output: {detail}")]
    Malformed { program: String, detail: String },
    #[error("adapter io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    NotConfigured(String),
}

fn default_timeout_ms() -> u64 {
    60_000
}

/// Program plus argument template. Arguments may contain `{input}`,
/// `{output}`, `{dpi}` and similar placeholders filled per invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandConfig {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

impl CommandConfig {
    pub fn new(program: impl Into<String>, args: &[&str]) -> Self {
        Self {
            program: program.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
            timeout_ms: default_timeout_ms(),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout_ms = timeout.as_millis() as u64;
        self
    }
}

/// Counting semaphore bounding how many adapter processes run at once.
#[derive(Debug)]
pub struct AdapterPool {
    permits: Mutex<usize>,
    released: Condvar,
}

impl AdapterPool {
    pub fn new(size: usize) -> Arc<Self> {
        Arc::new(Self {
            permits: Mutex::new(size.max(1)),
            released: Condvar::new(),
        })
    }

    fn acquire(self: &Arc<Self>) -> PoolPermit {
        let mut n = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.released.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        PoolPermit(Arc::clone(self))
    }
}

struct PoolPermit(Arc<AdapterPool>);

impl Drop for PoolPermit {
    fn drop(&mut self) {
        let mut n = self.0.permits.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.0.released.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct CommandAdapter {
    config: CommandConfig,
    pool: Option<Arc<AdapterPool>>,
}

impl CommandAdapter {
    pub fn new(config: CommandConfig) -> Self {
        Self { config, pool: None }
    }

    pub fn with_pool(mut self, pool: Arc<AdapterPool>) -> Self {
        self.pool = Some(pool);
        self
    }

    pub fn config(&self) -> &CommandConfig {
        &self.config
    }

    pub fn program(&self) -> &str {
        &self.config.program
    }

    /// Runs the command with placeholders substituted, feeding `stdin` and
    /// returning captured stdout.
    pub fn run(&self, vars: &[(&str, &str)], stdin: Option<&[u8]>) -> Result<Vec<u8>, AdapterError> {
        let _permit = self.pool.as_ref().map(|p| p.acquire());
        let program = self.config.program.clone();
        let args: Vec<String> = self
            .config
            .args
            .iter()
            .map(|a| {
                vars.iter()
                    .fold(a.clone(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
            })
            .collect();

        let mut child = Command::new(&program)
            .args(&args)
            .stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() })
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| AdapterError::Unavailable {
                program: program.clone(),
                source,
            })?;

        let writer = match (stdin, child.stdin.take()) {
            (Some(bytes), Some(mut pipe)) => {
                let bytes = bytes.to_vec();
                Some(thread::spawn(move || {
                    // A child that exits early closes the pipe; that surfaces via its status.
                    let _ = pipe.write_all(&bytes);
                }))
            }
            _ => None,
        };
        let mut stdout = child.stdout.take().expect("stdout is piped");
        let mut stderr = child.stderr.take().expect("stderr is piped");
        let out_reader = thread::spawn(move || {
            let mut buf = Vec::new();
            stdout.read_to_end(&mut buf).map(|_| buf)
        });
        let err_reader = thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            buf
        });

        let timeout = Duration::from_millis(self.config.timeout_ms);
        let status = match child.wait_timeout(timeout)? {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(AdapterError::Timeout {
                    program,
                    timeout_ms: self.config.timeout_ms,
                });
            }
        };
        if let Some(w) = writer {
            let _ = w.join();
        }
        let out = out_reader.join().expect("stdout reader panicked")?;
        let err = err_reader.join().expect("stderr reader panicked");
        if !status.success() {
            return Err(AdapterError::Failed {
                program,
                status: status.to_string(),
                stderr: String::from_utf8_lossy(&err).trim().to_string(),
            });
        }
        Ok(out)
    }
}
