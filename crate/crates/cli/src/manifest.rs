use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Everything needed to replay a run; written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub seed: Option<u64>,
    pub parameters: BTreeMap<&'static str, Value>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, seed: Option<u64>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            seed,
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn param(mut self, key: &'static str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key, value.into());
        self
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// `<primary>.manifest.json` beside the primary output file, or
    /// `manifest.json` inside an output directory.
    pub fn path_for(primary: &Path) -> PathBuf {
        if primary.is_dir() {
            return primary.join("manifest.json");
        }
        let mut name = primary.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        primary.with_file_name(name)
    }

    pub fn write(&self, primary: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(Self::path_for(primary), text)
    }
}
