//! Reproducibility manifest written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
    pub wall_clock_ms: u128,
}

pub struct ManifestBuilder {
    command: String,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    config: serde_json::Value,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: serde_json::Value::Null,
            started: Instant::now(),
        }
    }

    pub fn input(mut self, p: &Path) -> Self {
        self.inputs.push(p.to_path_buf());
        self
    }

    pub fn output(mut self, p: &Path) -> Self {
        self.outputs.push(p.to_path_buf());
        self
    }

    pub fn config<T: Serialize>(mut self, cfg: &T) -> Self {
        self.config = serde_json::to_value(cfg).expect("config serializes");
        self
    }

    /// Write `<anchor>.manifest.json` atomically (temp file + rename).
    pub fn write_next_to(self, anchor: &Path) -> Result<()> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            inputs: self
                .inputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            outputs: self
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            config: self.config,
            wall_clock_ms: self.started.elapsed().as_millis(),
        };
        let target = manifest_path(anchor);
        let tmp = target.with_extension("json.tmp");
        let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&tmp, body).with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, &target)
            .with_context(|| format!("renaming manifest into {}", target.display()))?;
        Ok(())
    }
}

pub fn manifest_path(anchor: &Path) -> PathBuf {
    let name = anchor
        .file_name()
        .map(|n| n.to_string_lossy())
        .unwrap_or_default();
    anchor.with_file_name(format!("{name}.manifest.json"))
}
