use std::path::{Path, PathBuf};

use qdtele_core::correlation::io::OutputMeta;
use qdtele_core::Result;
use serde::Serialize;

use crate::config::{sha256_hex, ExperimentConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
struct Entry {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool_version: &'a str,
    command: &'a str,
    config_hash: &'a str,
    seed: Option<u64>,
    inputs: &'a [Entry],
    outputs: &'a [Entry],
}

/// Files written by one command, hashed for the manifest.
pub struct Outputs {
    dir: PathBuf,
    command: &'static str,
    config_hash: String,
    seed: Option<u64>,
    inputs: Vec<Entry>,
    written: Vec<Entry>,
}

impl Outputs {
    pub fn create(dir: PathBuf, command: &'static str, cfg: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Outputs { dir, command, config_hash: cfg.hash(), seed: cfg.seed(), inputs: Vec::new(), written: Vec::new() })
    }

    pub fn meta(&self) -> OutputMeta {
        OutputMeta::new(self.config_hash.clone(), self.seed).with("tool_version", VERSION)
    }

    pub fn note_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(Entry { path: path.display().to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
    }

    pub fn input_hash(&self, path: &Path) -> Option<String> {
        let p = path.display().to_string();
        self.inputs.iter().find(|e| e.path == p).map(|e| e.sha256.clone())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        self.written.push(Entry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(path)
    }

    /// Writes `manifest.toml`, which lists everything else.
    pub fn finish(self) -> Result<PathBuf> {
        let m = Manifest {
            tool_version: VERSION,
            command: self.command,
            config_hash: &self.config_hash,
            seed: self.seed,
            inputs: &self.inputs,
            outputs: &self.written,
        };
        let path = self.dir.join("manifest.toml");
        std::fs::write(&path, toml::to_string(&m).expect("manifest serializes"))?;
        Ok(path)
    }
}
