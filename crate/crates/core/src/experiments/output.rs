use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub experiment: String,
    pub code_version: String,
    pub base_seed: u64,
    pub config: serde_json::Value,
    pub wall_time_s: f64,
    /// Model inputs that were chosen rather than measured (for example a
    /// background level), reported next to the results they produced.
    pub reported_parameters: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub outputs: Vec<OutputFile>,
}

pub fn code_version() -> String {
    format!("ioncav {}", env!("CARGO_PKG_VERSION"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Files of one run. Everything is written into `dir` and removed again if
/// any later write fails, so a directory never holds results without a
/// manifest.
pub(crate) struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
    pub(crate) entries: Vec<OutputFile>,
}

impl OutputSet {
    pub(crate) fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            entries: Vec::new(),
        })
    }

    pub(crate) fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Err(e) = fs::write(&path, contents) {
            self.discard();
            return Err(e.into());
        }
        self.written.push(path);
        self.entries.push(OutputFile {
            file: name.to_string(),
            sha256: sha256_hex(contents),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    /// Write the manifest through a temporary file and rename it into place.
    pub(crate) fn commit(mut self, manifest: &RunManifest) -> Result<()> {
        let tmp = self.dir.join(format!("{MANIFEST_FILE}.tmp"));
        let result = serde_json::to_vec_pretty(manifest)
            .map_err(Into::into)
            .and_then(|bytes| fs::write(&tmp, bytes).map_err(Into::into))
            .and_then(|()| fs::rename(&tmp, self.dir.join(MANIFEST_FILE)).map_err(Into::into));
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
            self.discard();
        }
        result
    }

    pub(crate) fn discard(&mut self) {
        for p in self.written.drain(..) {
            let _ = fs::remove_file(p);
        }
        self.entries.clear();
    }
}

/// CSV text with the manifest reference as its first line.
pub(crate) fn csv_with_manifest(body: &str) -> String {
    format!("# manifest: {MANIFEST_FILE}\n{body}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn discard_removes_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new(dir.path()).unwrap();
        out.write("a.csv", b"x").unwrap();
        assert!(dir.path().join("a.csv").exists());
        out.discard();
        assert!(!dir.path().join("a.csv").exists());
    }
}
