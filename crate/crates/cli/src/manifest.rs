use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Verb};
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the resolved configuration in its canonical JSON form.
pub fn config_hash(cfg: &RunConfig) -> CliResult<String> {
    Ok(sha256_hex(serde_json::to_string(cfg)?.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileRecord {
    pub fn of(path: &Path) -> CliResult<Self> {
        let data = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_hex(&data),
            bytes: data.len() as u64,
        })
    }

    /// Errors when the file no longer matches the recorded hash.
    pub fn check(&self) -> CliResult<()> {
        let now = Self::of(&self.path)?;
        if now.sha256 != self.sha256 {
            return Err(CliError::new(
                crate::error::ErrorKind::Verification,
                format!("{} changed since it was recorded", self.path.display()),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub schema: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub verb: Verb,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<OutputRecord>,
    pub started_unix_seconds: u64,
    pub wall_time_seconds: f64,
    pub platform: String,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let m: Self =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if m.schema_version != crate::SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "{}: unsupported schema_version {}",
                path.display(),
                m.schema_version
            )));
        }
        if config_hash(&m.config)? != m.config_hash {
            return Err(CliError::config(format!("{}: config hash does not match", path.display())));
        }
        Ok(m)
    }

    pub fn load_dir(dir: &Path) -> CliResult<Self> {
        Self::load(&dir.join(MANIFEST_FILE))
    }

    pub fn output(&self, file: &str) -> Option<&OutputRecord> {
        self.outputs.iter().find(|o| o.file == file)
    }
}
