//! `manifest.json`: what a command read, what it wrote, how it ended.

use std::path::{Path, PathBuf};

use serde::Serialize;

use elastica::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Run config, for `run`.
    pub config: Option<PathBuf>,
    /// Input curve or trace files, as absolute paths.
    pub inputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub parameters: serde_json::Value,
    /// Files written, relative to `out_dir`.
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub termination: Option<String>,
}

pub fn absolute(path: &Path) -> PathBuf {
    std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

impl RunManifest {
    pub fn new(command: &str, out_dir: &Path, parameters: serde_json::Value) -> Self {
        RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: None,
            inputs: Vec::new(),
            out_dir: absolute(out_dir),
            parameters,
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
            termination: None,
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(absolute(path));
    }

    /// Writes the manifest after checking that every file it names exists.
    pub fn write(&self) -> Result<()> {
        let named = self.config.iter().chain(&self.inputs).cloned().chain(self.outputs.iter().map(|o| self.out_dir.join(o)));
        for path in named {
            if !path.exists() {
                return Err(Error::Io(format!("manifest names missing file {}", path.display())));
            }
        }
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        let path = self.out_dir.join(MANIFEST);
        std::fs::write(&path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}
