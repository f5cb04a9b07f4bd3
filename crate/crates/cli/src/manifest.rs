//! Run manifests: everything needed to repeat a run, written next to its
//! outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::files;
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub parameters: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputFile>,
    pub fingerprints: BTreeMap<String, String>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &'static str, parameters: serde_json::Value) -> RunManifest {
        RunManifest {
            tool: "turtle-synth",
            version: env!("CARGO_PKG_VERSION"),
            command,
            parameters,
            seeds: Vec::new(),
            inputs: Vec::new(),
            fingerprints: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.seeds.push(seed);
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(InputFile {
            path: path.to_path_buf(),
            sha256: files::sha256_file(path)?,
        });
        Ok(())
    }

    pub fn fingerprint(&mut self, name: &str, value: String) {
        self.fingerprints.insert(name.to_string(), value);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// `result.json` gets `result.manifest.json` in the same directory.
    pub fn write_beside(&self, output: &Path) -> Result<(), CliError> {
        let stem = output
            .file_stem()
            .map_or("run".into(), |s| s.to_string_lossy().into_owned());
        self.write(&output.with_file_name(format!("{stem}.manifest.json")))
    }

    /// `manifest.json` inside an output directory.
    pub fn write_into(&self, dir: &Path) -> Result<(), CliError> {
        self.write(&dir.join("manifest.json"))
    }

    fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("serialisable manifest");
        text.push('\n');
        files::write_text(path, &text)
    }
}
