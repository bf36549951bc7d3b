//! Run manifest: a small record of what a subcommand did, written next to
//! its outputs so runs are auditable and reproducible.

use std::path::{Path, PathBuf};
use std::time::Duration;

use onebit_jscc::{Error, Result};

/// What a finished run looked like: the subcommand, every resolved parameter
/// (defaults included), the produced files, the tool version, and how long
/// the run took. Writing the manifest verifies that every listed output
/// actually exists.
pub struct RunManifest {
    subcommand: &'static str,
    parameters: Vec<(String, String)>,
    outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(subcommand: &'static str) -> Self {
        RunManifest {
            subcommand,
            parameters: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn param(&mut self, name: &str, value: impl std::fmt::Display) -> &mut Self {
        self.parameters.push((name.to_string(), value.to_string()));
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    /// Writes the manifest as `key,value[,value]` lines. Fails if any listed
    /// output is missing, so a successful run always leaves a truthful
    /// manifest.
    pub fn write(&self, path: &Path, duration: Duration) -> Result<()> {
        for out in &self.outputs {
            if !out.exists() {
                return Err(Error::InvalidParam(format!(
                    "manifest lists missing output {}",
                    out.display()
                )));
            }
        }
        let mut text = String::new();
        text.push_str(&format!("subcommand,{}\n", self.subcommand));
        text.push_str(&format!("version,{}\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!("duration_ms,{}\n", duration.as_millis()));
        for (k, v) in &self.parameters {
            text.push_str(&format!("param,{k},{v}\n"));
        }
        for out in &self.outputs {
            text.push_str(&format!("output,{}\n", out.display()));
        }
        std::fs::write(path, text)?;
        Ok(())
    }
}
