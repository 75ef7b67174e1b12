use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Hex SHA-256 of a file's contents.
pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_s: f64,
}

pub struct ManifestBuilder {
    subcommand: String,
    seed: u64,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn start(subcommand: &str, seed: u64, config: impl Serialize) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            seed,
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    /// Digests the inputs and every regular file in `out_dir` other than the
    /// manifest, then writes the manifest.
    pub fn finish(self, out_dir: &Path) -> Result<RunManifest, CliError> {
        let mut inputs = BTreeMap::new();
        for p in &self.inputs {
            inputs.insert(p.display().to_string(), file_digest(p)?);
        }
        let mut outputs = BTreeMap::new();
        let entries = fs::read_dir(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| CliError::io(out_dir, e))?;
            let path = entry.path();
            let name = entry.file_name().to_string_lossy().into_owned();
            if path.is_file() && name != MANIFEST_FILE {
                outputs.insert(name, file_digest(&path)?);
            }
        }
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: self.subcommand,
            seed: self.seed,
            config: self.config,
            inputs,
            outputs,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        let path = out_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}
