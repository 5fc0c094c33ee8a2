//! Output directory bookkeeping and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes files under a root directory and remembers their digests.
pub struct Artifacts {
    root: PathBuf,
    written: Vec<FileDigest>,
}

impl Artifacts {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.retain(|f| f.path != rel);
        self.written.push(FileDigest { path: rel.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Writes `manifest.json` describing the run and every file written so far.
    pub fn finish(mut self, manifest: Manifest) -> Result<()> {
        self.written.sort_by(|a, b| a.path.cmp(&b.path));
        let full = ManifestFile { manifest, outputs: self.written.clone() };
        let text = serde_json::to_string_pretty(&full)?;
        fs::write(self.root.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    /// The spec as parsed, re-serialized; reproduces the run without the input file.
    pub spec: Option<String>,
    pub exit_code: i32,
}

#[derive(Serialize)]
struct ManifestFile {
    #[serde(flatten)]
    manifest: Manifest,
    outputs: Vec<FileDigest>,
}
