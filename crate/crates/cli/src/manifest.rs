//! Run manifests: a JSON snapshot of what a command did, written atomically
//! next to its outputs so every run is reproducible from disk.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: u64,
    pub tool_version: String,
    pub duration_seconds: f64,
}

pub struct ManifestBuilder {
    command: String,
    pub config: serde_json::Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
    seed: u64,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed,
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// Serializes and writes the manifest via a temp-file rename.
    pub fn write(self, path: &Path) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: self.command,
            argv: std::env::args().collect(),
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Data(format!("manifest serialization: {e}")))?;
        let tmp: PathBuf = path.with_extension("json.tmp");
        fs::write(&tmp, json)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}
