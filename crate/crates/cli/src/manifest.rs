use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Record of one run, written beside its outputs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<Failure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
}

#[derive(Debug, Serialize)]
pub struct Failure {
    pub input: PathBuf,
    pub error: String,
}

impl Manifest {
    pub fn new(command: &'static str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config,
            failures: Vec::new(),
            result: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Usage(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|source| {
            CliError::Core(chansim_core::Error::Io {
                path: path.to_path_buf(),
                source,
            })
        })
    }
}

/// `<file>.manifest.json` next to `file`.
pub fn beside(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    file.with_file_name(name)
}
