//! Job queue with an atomically written checkpoint, so interrupted sweeps
//! resume without recomputing finished jobs.
//!
//! Checkpoint layout (JSON):
//!
//! ```text
//! { "version": 1,
//!   "config_hash": "<sha256 of the resolved config>",
//!   "total_jobs": N,
//!   "records": [ { "job_id": i, "params": {...}, "status": "ok" | "failed",
//!                  "detail": "...", "result": {...} }, ... ],
//!   "content_hash": "<sha256 of the records array>" }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Hex SHA-256 of the canonical JSON form of a value.
pub fn hash_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: usize,
    pub params: serde_json::Value,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub result: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub total_jobs: usize,
    pub records: Vec<JobRecord>,
    pub content_hash: String,
}

impl Checkpoint {
    pub fn new(config_hash: &str, total_jobs: usize) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config_hash: config_hash.to_string(),
            total_jobs,
            records: Vec::new(),
            content_hash: String::new(),
        }
    }

    fn compute_hash(&self) -> Result<String> {
        hash_json(&(&self.config_hash, self.total_jobs, &self.records))
    }

    pub fn is_complete(&self) -> bool {
        self.records.len() == self.total_jobs
    }

    /// Write to `path` via a temporary file and rename.
    pub fn save(&mut self, path: &Path) -> Result<()> {
        self.records.sort_by_key(|r| r.job_id);
        self.content_hash = self.compute_hash()?;
        let tmp = temp_path(path);
        fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Load and verify integrity and, if given, the config hash.
    pub fn load(path: &Path, expected_config_hash: Option<&str>) -> Result<Self> {
        let bytes = fs::read(path)?;
        let cp: Checkpoint =
            serde_json::from_slice(&bytes).map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", cp.version)));
        }
        if cp.compute_hash()? != cp.content_hash {
            return Err(Error::Checkpoint("content hash mismatch (checkpoint was modified)".into()));
        }
        if let Some(h) = expected_config_hash {
            if h != cp.config_hash {
                return Err(Error::Checkpoint("config hash mismatch".into()));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for r in &cp.records {
            if r.job_id >= cp.total_jobs || !seen.insert(r.job_id) {
                return Err(Error::Checkpoint(format!("invalid job id {}", r.job_id)));
            }
        }
        Ok(cp)
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Options of [`run_jobs`].
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Where to keep the checkpoint; `None` runs without one.
    pub checkpoint: Option<PathBuf>,
    pub config_hash: String,
    /// Stop after this many newly computed jobs (simulates an interruption).
    pub stop_after: Option<usize>,
}

/// Outcome of [`run_jobs`]: one slot per job, `None` while not computed.
#[derive(Clone, Debug)]
pub struct JobOutcome<R> {
    pub results: Vec<Option<std::result::Result<R, String>>>,
    pub complete: bool,
    pub computed_now: usize,
}

/// Run `f` over all jobs in parallel, resuming from and updating the
/// checkpoint. Results are placed by job index, so the outcome does not
/// depend on scheduling.
pub fn run_jobs<J, R, F>(jobs: &[J], opts: &RunOptions, f: F) -> Result<JobOutcome<R>>
where
    J: Serialize + Sync,
    R: Serialize + DeserializeOwned + Send,
    F: Fn(&J) -> std::result::Result<R, String> + Sync,
{
    let mut cp = match &opts.checkpoint {
        Some(p) if p.exists() => Checkpoint::load(p, Some(&opts.config_hash))?,
        _ => Checkpoint::new(&opts.config_hash, jobs.len()),
    };
    if cp.total_jobs != jobs.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} jobs, config defines {}",
            cp.total_jobs,
            jobs.len()
        )));
    }
    let mut results: Vec<Option<std::result::Result<R, String>>> = (0..jobs.len()).map(|_| None).collect();
    for r in &cp.records {
        results[r.job_id] = Some(match r.status {
            JobStatus::Ok => Ok(serde_json::from_value(r.result.clone())
                .map_err(|e| Error::Checkpoint(format!("bad record {}: {e}", r.job_id)))?),
            JobStatus::Failed => Err(r.detail.clone().unwrap_or_default()),
        });
    }
    let mut pending: Vec<usize> = (0..jobs.len()).filter(|&i| results[i].is_none()).collect();
    if let Some(limit) = opts.stop_after {
        pending.truncate(limit);
    }
    let batch = rayon::current_num_threads().max(1) * 4;
    let mut computed = 0;
    for chunk in pending.chunks(batch) {
        let out: Vec<(usize, std::result::Result<R, String>)> = chunk.par_iter().map(|&i| (i, f(&jobs[i]))).collect();
        for (i, r) in out {
            let (status, detail, value) = match &r {
                Ok(v) => (JobStatus::Ok, None, serde_json::to_value(v)?),
                Err(e) => (JobStatus::Failed, Some(e.clone()), serde_json::Value::Null),
            };
            cp.records.push(JobRecord {
                job_id: i,
                params: serde_json::to_value(&jobs[i])?,
                status,
                detail,
                result: value,
            });
            results[i] = Some(r);
            computed += 1;
        }
        if let Some(p) = &opts.checkpoint {
            cp.save(p)?;
        }
    }
    if let Some(p) = &opts.checkpoint {
        if computed == 0 {
            cp.save(p)?;
        }
    }
    let complete = results.iter().all(|r| r.is_some());
    Ok(JobOutcome {
        results,
        complete,
        computed_now: computed,
    })
}
