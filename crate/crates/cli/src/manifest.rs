//! Record of one command invocation: configuration, input and output digests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::io::write_json;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Input files as given on the command line.
    pub inputs: Vec<FileDigest>,
    /// Output files relative to the manifest's directory.
    pub outputs: Vec<FileDigest>,
    /// Unix seconds. Taken from `SOURCE_DATE_EPOCH` when it is set.
    pub started_at: u64,
    pub finished_at: u64,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

pub fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
    {
        return t;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn start(command: &str, seed: u64, config: &impl Serialize, inputs: &[&Path]) -> CliResult<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<CliResult<_>>()?;
        Ok(RunManifest {
            tool: "stratdesign".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            inputs,
            outputs: Vec::new(),
            started_at: timestamp(),
            finished_at: 0,
        })
    }

    /// Digests the named files in `out_dir` and writes the manifest next to them.
    pub fn finish(mut self, out_dir: &Path, outputs: &[String]) -> CliResult<PathBuf> {
        self.outputs = outputs
            .iter()
            .map(|name| {
                Ok(FileDigest {
                    path: name.clone(),
                    sha256: sha256_file(&out_dir.join(name))?,
                })
            })
            .collect::<CliResult<_>>()?;
        self.finished_at = timestamp();
        let path = out_dir.join(MANIFEST_NAME);
        write_json(&path, &self)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(path, e))
    }

    /// Recomputes every digest. Inputs resolve against the working directory,
    /// outputs against `dir`. Returns the files whose contents changed.
    pub fn verify(&self, dir: &Path) -> CliResult<Vec<String>> {
        let mut changed = Vec::new();
        for f in &self.inputs {
            if sha256_file(Path::new(&f.path))? != f.sha256 {
                changed.push(f.path.clone());
            }
        }
        for f in &self.outputs {
            if sha256_file(&dir.join(&f.path))? != f.sha256 {
                changed.push(f.path.clone());
            }
        }
        Ok(changed)
    }
}
