use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::settings::Settings;
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: Settings,
    pub seed: u64,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Core(qkc::Error::io(path, e)))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: &Settings,
        inputs: &[PathBuf],
        started: String,
    ) -> Result<Self, CliError> {
        Ok(RunManifest {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            config: config.clone(),
            seed: config.seed,
            inputs: inputs
                .iter()
                .map(|p| {
                    Ok(InputHash {
                        path: p.clone(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect::<Result<_, CliError>>()?,
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started,
            finished: String::new(),
        })
    }

    pub fn save(mut self, dir: &Path) -> Result<(), CliError> {
        self.finished = now();
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self).map_err(|e| CliError::Core(e.into()))?;
        std::fs::write(&path, text).map_err(|e| CliError::Core(qkc::Error::io(&path, e)))
    }
}
