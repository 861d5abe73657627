//! JSON artifacts written next to the core file formats.

use std::path::PathBuf;

use mipgnn::bnb::SolveReport;
use serde::{Deserialize, Serialize};

/// Record of a `generate` run: enough to recreate every instance.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentManifest<'a> {
    pub command: &'static str,
    pub seed: u64,
    pub config: &'a crate::GenerateArgs,
    pub instances: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionFile {
    pub instance_id: String,
    pub model: PathBuf,
    pub architecture: String,
    pub var_names: Vec<String>,
    pub predictions: Vec<f64>,
    pub inference_seconds: f64,
}

/// Solver settings stored with every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSettings {
    pub strategy: String,
    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,
    pub model: Option<PathBuf>,
    pub charge_inference: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub instance_id: String,
    pub seed: u64,
    pub settings: SolveSettings,
    pub inference_seconds: Option<f64>,
    pub report: SolveReport,
}

/// Per-command log: what ran, with which settings, and what it wrote.
#[derive(Debug, Clone, Serialize)]
pub struct RunLog<'a, C: Serialize> {
    pub command: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub config: &'a C,
    pub elapsed_seconds: f64,
    pub outputs: Vec<PathBuf>,
}
