use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;

use shiftsparse::io::write_atomic;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one command run, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    /// Full argument vector, program name excluded.
    pub args: Vec<String>,
    pub config: Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: Option<String>,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, config: Value, seeds: Vec<u64>) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            args: std::env::args().skip(1).collect(),
            config,
            seeds,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: now(),
            finished_at: None,
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Writes `bytes` atomically under `dir` and records the path.
    pub fn emit(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn finish(mut self, dir: &Path) -> anyhow::Result<PathBuf> {
        self.finished_at = Some(now());
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_vec_pretty(&self)?;
        text.push(b'\n');
        write_atomic(&path, &text)?;
        Ok(path)
    }
}
