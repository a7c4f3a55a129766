//! Versioned JSON configuration files.
//!
//! Every file is a JSON object carrying `"schema_version"` next to the
//! fields of the payload type. Missing fields take their defaults and
//! unknown fields are rejected with the path to the offending key.

use std::path::Path;

use dualband_sim::experiments::{EtaSweepSetup, IfwTuneSetup};
use dualband_sim::scenario::ScenarioConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::sweeps::TfSweepSpec;

pub const SCHEMA_VERSION: u64 = 1;

/// A scenario and the seeds to run it with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub scenario: ScenarioConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { seeds: vec![1], scenario: ScenarioConfig::default() }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds: at least one seed is required".into()));
        }
        self.scenario.validate().map_err(|e| CliError::Config(format!("scenario.{}", CliError::from(e).detail())))
    }
}

/// Several scenario runs written together.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Batch {
    pub runs: Vec<RunConfig>,
}

impl Batch {
    pub fn validate(&self) -> Result<()> {
        if self.runs.is_empty() {
            return Err(CliError::Config("runs: at least one run is required".into()));
        }
        for (i, r) in self.runs.iter().enumerate() {
            r.validate().map_err(|e| CliError::Config(format!("runs[{i}].{}", e.detail())))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtaSweepConfig {
    pub setup: EtaSweepSetup,
    pub celltx_ms: Vec<u32>,
    pub seed: u64,
}

impl Default for EtaSweepConfig {
    fn default() -> Self {
        EtaSweepConfig { setup: EtaSweepSetup::default(), celltx_ms: vec![1, 5, 10, 50, 100, 500], seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub setup: IfwTuneSetup,
    pub targets: Vec<f64>,
    pub seed: u64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig { setup: IfwTuneSetup::default(), targets: vec![0.2, 0.35, 0.5, 0.65, 0.8], seed: 1 }
    }
}

/// Parses a versioned document into `T`.
pub fn parse_versioned<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("not valid JSON: {e}")))?;
    let obj = value.as_object_mut().ok_or_else(|| CliError::Config("top level must be a JSON object".into()))?;
    match obj.remove("schema_version") {
        None => return Err(CliError::Config("schema_version: missing".into())),
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(CliError::Config(format!("schema_version: expected {SCHEMA_VERSION}, found {v}")));
        }
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{path}: {}", e.into_inner()))
    })
}

/// Writes `T` with its schema version, as `parse_versioned` reads it.
pub fn emit_versioned<T: Serialize>(body: &T) -> Result<String> {
    let mut value = serde_json::to_value(body).map_err(|e| CliError::Runtime(e.to_string()))?;
    let obj = value.as_object_mut().ok_or_else(|| CliError::Runtime("config must serialize to an object".into()))?;
    let mut out = serde_json::Map::new();
    out.insert("schema_version".into(), SCHEMA_VERSION.into());
    out.append(obj);
    serde_json::to_string_pretty(&out).map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Reads and validates a scenario run file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let cfg: RunConfig = parse_versioned(&read_file(path)?)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_tf_sweep(path: &Path) -> Result<TfSweepSpec> {
    let spec: TfSweepSpec = parse_versioned(&read_file(path)?)?;
    spec.validate()?;
    Ok(spec)
}

pub fn parse_eta_sweep(path: &Path) -> Result<EtaSweepConfig> {
    parse_versioned(&read_file(path)?)
}

pub fn parse_tune(path: &Path) -> Result<TuneConfig> {
    parse_versioned(&read_file(path)?)
}

/// Reads either a single run or a `{"runs": [...]}` batch.
pub fn parse_batch(path: &Path) -> Result<Batch> {
    let text = read_file(path)?;
    let is_batch = serde_json::from_str::<serde_json::Value>(&text)
        .map(|v| v.get("runs").is_some())
        .unwrap_or(false);
    let batch = if is_batch {
        parse_versioned::<Batch>(&text)?
    } else {
        Batch { runs: vec![parse_versioned::<RunConfig>(&text)?] }
    };
    batch.validate()?;
    Ok(batch)
}
