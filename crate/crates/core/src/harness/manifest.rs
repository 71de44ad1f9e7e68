//! Run manifests: what was run, on which inputs, producing which outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{FaError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

impl Artifact {
    pub fn of(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        })
    }

    /// Whether the file on disk still has the recorded checksum.
    pub fn matches(&self) -> bool {
        sha256_file(&self.path).map(|h| h == self.sha256).unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifestConfig {
    pub max_iters: usize,
    pub div_tol: f64,
    pub residual_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments (after the program name) that reproduce the run.
    pub args: Vec<String>,
    pub seed: u64,
    #[serde(default)]
    pub engines: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ManifestConfig>,
    #[serde(default)]
    pub inputs: Vec<Artifact>,
    #[serde(default)]
    pub outputs: Vec<Artifact>,
}

impl RunManifest {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FaError::InvalidConfig(format!("manifest serialization: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| FaError::Parse {
            line: e
                .span()
                .map(|s| text[..s.start].matches('\n').count() as u64 + 1)
                .unwrap_or(0),
            message: e.message().to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Paths of recorded artifacts whose current checksum differs.
    pub fn stale_artifacts(&self) -> Vec<&str> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .filter(|a| !a.matches())
            .map(|a| a.path.as_str())
            .collect()
    }

    /// Re-runs the recorded command, overwriting its outputs; returns the exit code.
    pub fn replay(&self) -> i32 {
        let argv = std::iter::once("fa-idiv".to_string()).chain(self.args.iter().cloned());
        super::cli_main(argv)
    }
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// `dir/stem.suffix` for a file `dir/stem.ext`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// The manifest written next to a trace file.
pub fn manifest_path_for(trace: &Path) -> PathBuf {
    sidecar(trace, "manifest.toml")
}
