use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA: &str = "stochhom.run-manifest/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileEntry {
    pub fn of(name: &str, bytes: &[u8]) -> Self {
        Self {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex(&Sha256::digest(bytes)),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionRecord {
    pub name: String,
    pub passed: bool,
    /// `null` when not finite.
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub version: String,
    pub experiment: String,
    /// Canonical text of the merged configuration; rerunning with it
    /// reproduces every file hash.
    pub config: String,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    pub files: Vec<FileEntry>,
    pub assertions: Vec<AssertionRecord>,
    pub passed: bool,
}

impl RunManifest {
    pub fn file(&self, name: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.name == name)
    }

    pub fn assertion(&self, name: &str) -> Option<&AssertionRecord> {
        self.assertions.iter().find(|a| a.name == name)
    }

    /// Hashes of every output, keyed by file name.
    pub fn hashes(&self) -> Vec<(&str, &str)> {
        self.files
            .iter()
            .map(|f| (f.name.as_str(), f.sha256.as_str()))
            .collect()
    }
}
