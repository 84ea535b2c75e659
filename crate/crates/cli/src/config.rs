use std::path::{Path, PathBuf};

use qdtele_core::correlation::Normalization;
use qdtele_core::estimation::G2Levels;
use qdtele_core::experiment::TeleportAnalysis;
use qdtele_core::synth::SimConfig;
use qdtele_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const OUTPUT_DIR_ENV: &str = "QDTELE_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "qdtele-out";

/// One document fully describing a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Absent for analysis-only runs on recorded files.
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    pub g2_span_ps: i64,
    pub g2_bin_ps: i64,
    pub normalization: Normalization,
    pub g2_model: G2Levels,
    /// Detector response used by fits; defaults to the simulated detector.
    pub response_fwhm_ps: Option<f64>,
    pub fit_detuning: bool,
    pub teleport: TeleportAnalysis,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            g2_span_ps: 50_000,
            g2_bin_ps: 25,
            normalization: Normalization::default(),
            g2_model: G2Levels::Four,
            response_fwhm_ps: None,
            fit_detuning: false,
            teleport: TeleportAnalysis::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn analysis_only() -> Self {
        ExperimentConfig { sim: None, analysis: AnalysisSettings::default(), output_dir: None }
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string(), overrides)
    }

    /// Parses the document and applies `key.path=value` overrides. Without
    /// overrides the text is deserialized directly so errors keep their line.
    pub fn parse(text: &str, name: &str, overrides: &[String]) -> Result<Self> {
        let cfg: ExperimentConfig = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| Error::config(format!("{name}: {e}")))?
        } else {
            let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::config(format!("{name}: {e}")))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            table.try_into().map_err(|e| Error::config(format!("{name} with overrides: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(sim) = &self.sim {
            sim.validate()?;
        }
        let a = &self.analysis;
        qdtele_core::correlation::BinSpec::new(a.g2_span_ps, a.g2_bin_ps)?;
        a.teleport.axes()?;
        if a.teleport.inputs.is_empty() {
            return Err(Error::config("analysis.teleport.inputs must name at least one state"));
        }
        if let Some(f) = a.response_fwhm_ps {
            if !(f >= 0.0) {
                return Err(Error::config(format!("analysis.response_fwhm_ps must be non-negative, got {f}")));
            }
        }
        Ok(())
    }

    pub fn require_sim(&self) -> Result<&SimConfig> {
        self.sim.as_ref().ok_or_else(|| Error::config("this command needs a [sim] table in the config"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    pub fn seed(&self) -> Option<u64> {
        self.sim.as_ref().map(|s| s.seed)
    }

    pub fn response_fwhm_ps(&self) -> f64 {
        self.analysis.response_fwhm_ps.or(self.sim.as_ref().map(|s| s.detector.response_fwhm_ps)).unwrap_or(0.0)
    }

    /// `--out`, then the config, then the environment, then a fixed default.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) =
        spec.split_once('=').ok_or_else(|| Error::config(format!("override {spec:?} is not of the form key.path=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(format!("override {spec:?} has an empty key")));
    }
    // Bare words that are not TOML literals are taken as strings.
    let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override {spec:?}: {k} is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
