//! Staged writing of run outputs.
//!
//! Files are written to a hidden staging directory inside the output
//! directory, checked against their schema, and moved into place together
//! with the manifest only when every file is ready. Dropping an uncommitted
//! [`Stage`] removes everything it created.

use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult, ErrorKind};
use crate::manifest::{sha256_hex, Manifest, OutputRecord, MANIFEST_FILE};

/// Expected layout of an output file.
#[derive(Debug, Clone, PartialEq)]
pub enum Schema {
    /// CSV whose header starts with the listed columns.
    Csv { id: &'static str, columns: Vec<String> },
    /// JSON object carrying a matching `schema_version`.
    Json { id: &'static str },
    Text { id: &'static str },
}

impl Schema {
    pub fn csv(id: &'static str, columns: &[&str]) -> Self {
        Schema::Csv {
            id,
            columns: columns.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn name(&self) -> String {
        let id = match self {
            Schema::Csv { id, .. } | Schema::Json { id } | Schema::Text { id } => id,
        };
        format!("cgalqr.{id}/{}", crate::SCHEMA_VERSION)
    }

    pub fn validate(&self, bytes: &[u8]) -> Result<(), String> {
        match self {
            Schema::Csv { columns, .. } => {
                let mut rd = csv::Reader::from_reader(bytes);
                let header: Vec<String> = rd.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
                if header.len() < columns.len() || header[..columns.len()] != columns[..] {
                    return Err(format!("header {header:?} does not start with {columns:?}"));
                }
                for rec in rd.records() {
                    rec.map_err(|e| e.to_string())?;
                }
                Ok(())
            }
            Schema::Json { .. } => {
                let v: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
                match v.get("schema_version").and_then(|s| s.as_u64()) {
                    Some(s) if s == u64::from(crate::SCHEMA_VERSION) => Ok(()),
                    _ => Err("missing or wrong schema_version".into()),
                }
            }
            Schema::Text { .. } => std::str::from_utf8(bytes).map(|_| ()).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OutputFile {
    pub name: String,
    pub schema: Schema,
    pub bytes: Vec<u8>,
}

impl OutputFile {
    pub fn new(name: &str, schema: Schema, bytes: Vec<u8>) -> Self {
        Self {
            name: name.into(),
            schema,
            bytes,
        }
    }

    pub fn json(name: &str, id: &'static str, value: &serde_json::Value) -> CliResult<Self> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        Ok(Self::new(name, Schema::Json { id }, bytes))
    }
}

pub struct Stage {
    dir: PathBuf,
    staging: PathBuf,
    created_dir: bool,
    records: Vec<OutputRecord>,
    committed: bool,
}

impl Stage {
    pub fn new(dir: &Path) -> CliResult<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let staging = dir.join(format!(".staging-{}", std::process::id()));
        if staging.exists() {
            std::fs::remove_dir_all(&staging).map_err(|e| io(&staging, e))?;
        }
        std::fs::create_dir(&staging).map_err(|e| io(&staging, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            staging,
            created_dir,
            records: vec![],
            committed: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records(&self) -> &[OutputRecord] {
        &self.records
    }

    pub fn add(&mut self, f: OutputFile) -> CliResult<()> {
        if f.name == MANIFEST_FILE || f.name.contains(['/', '\\']) {
            return Err(CliError::new(ErrorKind::Io, format!("invalid output name '{}'", f.name)));
        }
        f.schema.validate(&f.bytes).map_err(|m| {
            CliError::new(ErrorKind::Verification, format!("{} fails schema {}: {m}", f.name, f.schema.name()))
        })?;
        let path = self.staging.join(&f.name);
        std::fs::write(&path, &f.bytes).map_err(|e| io(&path, e))?;
        self.records.push(OutputRecord {
            file: f.name,
            schema: f.schema.name(),
            sha256: sha256_hex(&f.bytes),
            bytes: f.bytes.len() as u64,
        });
        Ok(())
    }

    /// Errors unless the staged outputs match `expected` file for file.
    pub fn verify(&self, expected: &[OutputRecord]) -> CliResult<()> {
        let key = |r: &OutputRecord| (r.file.clone(), r.sha256.clone());
        let mut got: Vec<_> = self.records.iter().map(key).collect();
        let mut want: Vec<_> = expected.iter().map(key).collect();
        got.sort();
        want.sort();
        if got != want {
            let differing: Vec<String> = self
                .records
                .iter()
                .filter(|r| !expected.iter().any(|e| e.file == r.file && e.sha256 == r.sha256))
                .map(|r| r.file.clone())
                .chain(
                    expected
                        .iter()
                        .filter(|e| !self.records.iter().any(|r| r.file == e.file))
                        .map(|e| e.file.clone()),
                )
                .collect();
            return Err(CliError::new(
                ErrorKind::Verification,
                format!("outputs differ from the manifest: {}", differing.join(", ")),
            ));
        }
        Ok(())
    }

    /// Moves the staged files into place, removes outputs of an earlier run
    /// that this run does not produce, and writes the manifest last.
    pub fn commit(mut self, manifest: &Manifest) -> CliResult<()> {
        let old = self.dir.join(MANIFEST_FILE);
        if let Ok(prev) = Manifest::load(&old) {
            for o in &prev.outputs {
                if !self.records.iter().any(|r| r.file == o.file) {
                    let _ = std::fs::remove_file(self.dir.join(&o.file));
                }
            }
        }
        let _ = std::fs::remove_file(&old);
        for r in &self.records {
            let from = self.staging.join(&r.file);
            std::fs::rename(&from, self.dir.join(&r.file)).map_err(|e| io(&from, e))?;
        }
        let mut text = serde_json::to_vec_pretty(manifest)?;
        text.push(b'\n');
        let tmp = self.staging.join(MANIFEST_FILE);
        std::fs::write(&tmp, text).map_err(|e| io(&tmp, e))?;
        std::fs::rename(&tmp, &old).map_err(|e| io(&old, e))?;
        std::fs::remove_dir_all(&self.staging).map_err(|e| io(&self.staging, e))?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Stage {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        let _ = std::fs::remove_dir_all(&self.staging);
        if self.created_dir {
            // Only succeeds when nothing else was put there.
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

fn io(p: &Path, e: std::io::Error) -> CliError {
    CliError::new(ErrorKind::Io, format!("{}: {e}", p.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_checks() {
        let s = Schema::csv("x", &["a", "b"]);
        assert!(s.validate(b"a,b,c\n1,2,3\n").is_ok());
        assert!(s.validate(b"b,a\n1,2\n").is_err());
        assert!(s.validate(b"a,b\n1,2,3\n").is_err());
        let j = Schema::Json { id: "y" };
        assert!(j.validate(br#"{"schema_version":1}"#).is_ok());
        assert!(j.validate(br#"{"schema_version":2}"#).is_err());
        assert!(j.validate(b"{}").is_err());
        assert_eq!(j.name(), "cgalqr.y/1");
    }

    #[test]
    fn dropped_stage_leaves_nothing() {
        let root = std::env::temp_dir().join(format!("cgalqr-stage-test-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&root);
        {
            let mut st = Stage::new(&root).unwrap();
            st.add(OutputFile::new("a.csv", Schema::csv("a", &["x"]), b"x\n1\n".to_vec())).unwrap();
            assert!(st.add(OutputFile::new("b.csv", Schema::csv("b", &["y"]), b"x\n1\n".to_vec())).is_err());
        }
        assert!(!root.exists());
    }
}
