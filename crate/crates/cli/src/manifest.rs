//! Run directories and their `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use symog::train::TrainConfig;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

/// Everything that determines a run's outputs, plus wall-clock bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub run_id: String,
    pub command: String,
    pub arch: String,
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_sha256: Option<String>,
    pub config: TrainConfig,
    pub version: String,
    pub started_at: String,
    pub finished_at: Option<String>,
}

#[derive(Serialize)]
struct Identity<'a> {
    command: &'a str,
    arch: &'a str,
    data_dir: &'a Path,
    init_sha256: &'a Option<String>,
    config: &'a TrainConfig,
}

fn absolute(p: &Path) -> PathBuf {
    p.canonicalize().unwrap_or_else(|_| p.to_path_buf())
}

impl Manifest {
    pub fn new(command: &str, arch: &str, data_dir: &Path, output_dir: &Path, init: Option<&Path>, config: &TrainConfig) -> Result<Self> {
        let init_sha256 = init.map(file_sha256).transpose()?;
        let data_dir = &absolute(data_dir);
        let identity = Identity {
            command,
            arch,
            data_dir,
            init_sha256: &init_sha256,
            config,
        };
        let digest = Sha256::digest(serde_json::to_vec(&identity)?);
        Ok(Manifest {
            run_id: hex(&digest[..8]),
            command: command.into(),
            arch: arch.into(),
            data_dir: data_dir.into(),
            output_dir: absolute(output_dir),
            init_checkpoint: init.map(absolute),
            init_sha256,
            config: config.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            started_at: now(),
            finished_at: None,
        })
    }

    pub fn write(&self) -> Result<()> {
        let path = self.output_dir.join("manifest.json");
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(&path, json).with_context(|| format!("writing {}", path.display()))
    }

    pub fn finish(&mut self) -> Result<()> {
        self.finished_at = Some(now());
        self.write()
    }
}

fn now() -> String {
    OffsetDateTime::now_utc().format(&Rfc3339).unwrap_or_default()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(bytes)))
}
