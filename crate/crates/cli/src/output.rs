//! Collects artifacts in memory and writes them with a run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ConfigFile;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const OUT_ENV: &str = "SKEWCHAIN_OUT";

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash(config: &ConfigFile) -> String {
    hex(&serde_json::to_vec(config).expect("config serializes"))
}

/// Output directory: the override if given, then `SKEWCHAIN_OUT`, then the
/// config's `output.dir`.
pub fn output_dir(config: &ConfigFile, over: Option<&Path>) -> PathBuf {
    if let Some(p) = over {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(&config.output.dir),
    }
}

pub struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
    stages: Vec<(String, f64)>,
    started: Instant,
    stage_start: Instant,
}

impl Default for Artifacts {
    fn default() -> Self {
        let now = Instant::now();
        Artifacts { files: BTreeMap::new(), stages: Vec::new(), started: now, stage_start: now }
    }
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.insert(name.to_string(), bytes);
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Records the time since the previous mark under `stage`.
    pub fn mark(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push((stage.to_string(), (now - self.stage_start).as_secs_f64()));
        self.stage_start = now;
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// Writes every artifact plus `manifest.json`. Everything except the
    /// manifest's `runtime` entry depends only on the resolved config.
    pub fn write(
        self,
        dir: &Path,
        subcommand: &str,
        config: &ConfigFile,
        status: &str,
        summary: Value,
        threads: usize,
    ) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(dir)?;
        let mut hashes = BTreeMap::new();
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
            hashes.insert(name.clone(), hex(bytes));
        }
        let stages: BTreeMap<_, _> = self.stages.iter().cloned().collect();
        let manifest = json!({
            "tool": "skewchain",
            "version": env!("CARGO_PKG_VERSION"),
            "core_version": skewchain_core::VERSION,
            "subcommand": subcommand,
            "status": status,
            "config_hash": config_hash(config),
            "config": config,
            "files": hashes,
            "summary": summary,
            "runtime": {
                "threads": threads,
                "seconds": self.started.elapsed().as_secs_f64(),
                "stages": stages,
            },
        });
        let path = dir.join(MANIFEST);
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes)?;
        Ok(path)
    }
}
