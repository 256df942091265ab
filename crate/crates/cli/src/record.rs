//! Run records: what was run, with which configuration, and a checksummed
//! manifest of every file written.

use std::fs;
use std::path::{Path, PathBuf};

use gevrey_core::galerkin::StopRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const RECORD_FILE: &str = "run_record.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub path_index: u64,
    pub stops: Vec<StopRecord>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub harness: String,
    pub schema: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config_hash: String,
    pub versions: Versions,
    pub threads: usize,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    pub paths: Vec<PathRecord>,
    pub summary: serde_json::Value,
    pub manifest: Vec<ManifestEntry>,
}

impl RunRecord {
    pub fn record_path(dir: &Path) -> PathBuf {
        dir.join(RECORD_FILE)
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(Self::record_path(dir), text + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<RunRecord, CliError> {
        let text = fs::read_to_string(Self::record_path(dir))?;
        serde_json::from_str(&text).map_err(|e| CliError::Io(e.to_string()))
    }

    /// Files whose size or checksum no longer matches the manifest.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>, CliError> {
        let mut bad = Vec::new();
        for entry in &self.manifest {
            let data = fs::read(dir.join(&entry.file))?;
            if data.len() as u64 != entry.bytes || sha256_hex(&data) != entry.sha256 {
                bad.push(entry.file.clone());
            }
        }
        Ok(bad)
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Collects output files as they are written.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), entries: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, data: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, data)?;
        self.track(name, data);
        Ok(())
    }

    /// Registers a file written by someone else.
    pub fn adopt(&mut self, name: &str) -> Result<(), CliError> {
        let data = fs::read(self.root.join(name))?;
        self.track(name, &data);
        Ok(())
    }

    fn track(&mut self, name: &str, data: &[u8]) {
        self.entries.retain(|e| e.file != name);
        self.entries.push(ManifestEntry { file: name.to_string(), bytes: data.len() as u64, sha256: sha256_hex(data) });
    }

    pub fn into_manifest(mut self) -> Vec<ManifestEntry> {
        self.entries.sort_by(|a, b| a.file.cmp(&b.file));
        self.entries
    }
}

/// CSV text from a header and preformatted rows.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}
