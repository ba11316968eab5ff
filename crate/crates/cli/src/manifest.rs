use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one invocation: what ran, on which files, and what it produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub verb: String,
    pub command_line: Vec<String>,
    pub config: Value,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timings_s: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, Value>,
}

pub fn sha256_file(path: &Path) -> Result<FileDigest, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        bytes: bytes.len() as u64,
    })
}

/// Collects manifest content while a command runs.
pub struct Recorder {
    manifest: RunManifest,
    phase: Option<(String, Instant)>,
}

impl Recorder {
    pub fn new(verb: &str, command_line: Vec<String>, config: Value, seed: u64) -> Self {
        let versions = BTreeMap::from([
            ("fri-sr".to_string(), fri_sr::VERSION.to_string()),
            ("fri-sr-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        Self {
            manifest: RunManifest {
                verb: verb.to_string(),
                command_line,
                config,
                seed,
                versions,
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings_s: BTreeMap::new(),
                metrics: BTreeMap::new(),
            },
            phase: None,
        }
    }

    /// Ends the running phase (if any) and starts timing `name`.
    pub fn phase(&mut self, name: &str) {
        self.end_phase();
        self.phase = Some((name.to_string(), Instant::now()));
    }

    fn end_phase(&mut self) {
        if let Some((name, t)) = self.phase.take() {
            self.manifest.timings_s.insert(name, t.elapsed().as_secs_f64());
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.inputs.push(sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.outputs.push(sha256_file(path)?);
        Ok(())
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.manifest.metrics.insert(key.to_string(), value.into());
    }

    /// Writes `<dir>/<name>.manifest.json` and returns its path.
    pub fn finish(mut self, dir: &Path, name: &str) -> Result<PathBuf, CliError> {
        self.end_phase();
        let path = dir.join(format!("{name}.manifest.json"));
        let text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| CliError::Internal(format!("manifest: {e}")))?;
        fri_sr::formats::write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// Float metrics that may be infinite are stored as strings.
pub fn float_value(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from(x.to_string())
    }
}
