//! Staged output files and run manifests.
//!
//! Outputs are written to temporary files beside their destination and
//! renamed into place only once the whole command has succeeded, so a
//! failing command leaves no partial files behind.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::{CliError, Result};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of_bytes(path: &Path, bytes: &[u8]) -> Self {
        Self { path: path.display().to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 }
    }

    pub fn of_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::data(path.display(), e))?;
        Ok(Self::of_bytes(path, &bytes))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Record of one artifact-producing invocation, sufficient to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    pub working_dir: String,
    pub tool_version: String,
    /// Effective configuration after flags were applied.
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path.display(), e))?;
        let manifest: Self = serde_json::from_str(&text).map_err(|e| CliError::data(path.display(), e))?;
        if manifest.format_version != MANIFEST_FORMAT_VERSION {
            return Err(CliError::Data(format!(
                "{}: unsupported manifest version {}",
                path.display(),
                manifest.format_version
            )));
        }
        Ok(manifest)
    }
}

/// `dir/name.ext` → `dir/name.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    output.with_file_name(format!("{stem}.manifest.json"))
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Outputs waiting to be committed.
#[derive(Default)]
pub struct Staged {
    files: Vec<(NamedTempFile, PathBuf, FileDigest)>,
}

impl Staged {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        let dir = parent_dir(path);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::data(dir.display(), e))?;
        let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| CliError::data(dir.display(), e))?;
        tmp.write_all(bytes)?;
        tmp.flush()?;
        self.files.push((tmp, path.to_path_buf(), FileDigest::of_bytes(path, bytes)));
        Ok(())
    }

    pub fn digests(&self) -> Vec<FileDigest> {
        self.files.iter().map(|(_, _, d)| d.clone()).collect()
    }

    /// Renames every staged file into place.
    pub fn commit(self) -> Result<Vec<FileDigest>> {
        let mut out = Vec::with_capacity(self.files.len());
        for (tmp, path, digest) in self.files {
            tmp.persist(&path).map_err(|e| CliError::data(path.display(), e.error))?;
            out.push(digest);
        }
        Ok(out)
    }
}
