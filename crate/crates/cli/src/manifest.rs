//! Run manifests: every stage writes `manifest_<stage>.json` listing its
//! configuration snapshot, derived seeds, output files with content hashes,
//! and headline metrics. Wall-clock timings are recorded only outside serial
//! reproducibility mode, so serial reruns are byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Serialize)]
pub struct Artifact {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub stage: String,
    pub code_version: String,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub artifacts: Vec<Artifact>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, u64>>,
}

pub struct ManifestBuilder {
    stage: String,
    config: BTreeMap<String, String>,
    seeds: BTreeMap<String, u64>,
    artifacts: Vec<PathBuf>,
    metrics: BTreeMap<String, f64>,
    timings: BTreeMap<String, u64>,
    serial: bool,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(stage: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            stage: stage.to_string(),
            config: cfg.to_map(),
            seeds: BTreeMap::new(),
            artifacts: Vec::new(),
            metrics: BTreeMap::new(),
            timings: BTreeMap::new(),
            serial: cfg.serial,
            started: Instant::now(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn timing(&mut self, name: &str) {
        self.timings
            .insert(name.to_string(), self.started.elapsed().as_millis() as u64);
    }

    /// Hash all artifacts and write `manifest_<stage>.json` in `out_dir`.
    pub fn write(mut self, out_dir: &Path) -> Result<PathBuf> {
        self.artifacts.sort();
        let artifacts = self
            .artifacts
            .iter()
            .map(|p| {
                let bytes = std::fs::read(p)
                    .map_err(|e| CliError::Io(format!("hashing {}: {e}", p.display())))?;
                let rel = p
                    .strip_prefix(out_dir)
                    .unwrap_or(p)
                    .to_string_lossy()
                    .replace('\\', "/");
                Ok(Artifact {
                    path: rel,
                    bytes: bytes.len() as u64,
                    sha256: hex(&Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            stage: self.stage.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config,
            seeds: self.seeds,
            artifacts,
            metrics: self.metrics,
            timings_ms: if self.serial { None } else { Some(self.timings) },
        };
        let path = out_dir.join(format!("manifest_{}.json", self.stage));
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, json + "\n")
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
