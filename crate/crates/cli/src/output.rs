use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use noisesync::sweep::sha256_hex;

use crate::config::ExperimentConfig;
use crate::{CliError, DEFAULT_OUTPUT_ROOT, OUTPUT_ROOT_ENV};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_ECHO: &str = "config.json";
pub const CHECKPOINT: &str = "checkpoint.json";

/// Output root from the environment, else the default.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

pub fn output_dir_for(cfg: &ExperimentConfig, root: &Path) -> PathBuf {
    root.join(cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.name)))
}

#[derive(Clone, Debug, Serialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: String,
    kind: &'static str,
    config_hash: String,
    seed: u64,
    complete: bool,
    wall_time_s: f64,
    artifacts: &'a [ArtifactEntry],
    config: &'a ExperimentConfig,
}

/// Collects artifacts of one run; only the coordinating thread writes.
pub struct Output {
    pub dir: PathBuf,
    artifacts: Vec<ArtifactEntry>,
    started: Instant,
}

impl Output {
    pub fn create(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            artifacts: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Write an artifact atomically and record its hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        let tmp = self.path(&format!("{name}.tmp"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        self.artifacts.retain(|a| a.file != name);
        self.artifacts.push(ArtifactEntry {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        v.push(b'\n');
        self.write(name, &v)
    }

    pub fn artifacts(&self) -> &[ArtifactEntry] {
        &self.artifacts
    }

    pub fn finish(&mut self, cfg: &ExperimentConfig, complete: bool) -> Result<(), CliError> {
        let m = Manifest {
            tool: "noisesync",
            version: version_string(),
            kind: cfg.experiment.kind(),
            config_hash: cfg.numeric_hash(),
            seed: cfg.seed,
            complete,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            artifacts: &self.artifacts,
            config: cfg,
        };
        let bytes = serde_json::to_vec_pretty(&m).map_err(|e| CliError::Runtime(e.to_string()))?;
        let tmp = self.path("manifest.json.tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(tmp, self.path(MANIFEST))?;
        Ok(())
    }
}

/// Package version plus the source revision when it was known at build time.
pub fn version_string() -> String {
    match option_env!("NOISESYNC_GIT_DESCRIBE") {
        Some(g) if !g.is_empty() => format!("{} ({g})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}
