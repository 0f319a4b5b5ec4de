//! Per-replication records. Everything except `timing_ms` is a pure function of
//! the configuration and master seed.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oracle_lab::{LinearBounds, OracleReport, Theorem1Check};
use crate::selection::Recovery;
use crate::solver::FitResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Ok,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub support: Vec<usize>,
    pub beta_hat: Vec<f64>,
}

impl From<&FitResult> for FitSummary {
    fn from(f: &FitResult) -> Self {
        Self {
            objective: f.objective,
            kkt_residual: f.kkt_residual,
            iterations: f.iterations,
            converged: f.converged,
            support: f.support.clone(),
            beta_hat: f.beta_hat.iter().copied().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub lambda1: f64,
    pub lambda2: f64,
    pub support: Vec<usize>,
    pub threshold: f64,
    pub thresholded_support: Vec<usize>,
    pub screening: Recovery,
    pub thresholded: Recovery,
    pub path_points: usize,
    pub non_converged: usize,
    pub monotonicity_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub study: String,
    pub replication: usize,
    pub seed: u64,
    pub n: usize,
    pub status: RecordStatus,
    #[serde(default)]
    pub error: Option<String>,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(default)]
    pub fit: Option<FitSummary>,
    #[serde(default)]
    pub oracle: Option<OracleReport>,
    #[serde(default)]
    pub tau_member: Option<bool>,
    #[serde(default)]
    pub theorem1: Option<Theorem1Check>,
    #[serde(default)]
    pub linear: Option<LinearBounds>,
    #[serde(default)]
    pub selection: Option<SelectionSummary>,
    #[serde(default)]
    pub mse: Option<f64>,
    #[serde(default)]
    pub s_star: Option<usize>,
    pub timing_ms: f64,
}

impl ReplicationRecord {
    pub fn aborted(study: &str, replication: usize, seed: u64, n: usize, error: String) -> Self {
        Self {
            study: study.to_string(),
            replication,
            seed,
            n,
            status: RecordStatus::Aborted,
            error: Some(error),
            lambda0: f64::NAN,
            lambda1: f64::NAN,
            lambda2: f64::NAN,
            fit: None,
            oracle: None,
            tau_member: None,
            theorem1: None,
            linear: None,
            selection: None,
            mse: None,
            s_star: None,
            timing_ms: 0.0,
        }
    }

    /// JSON of the record without the timing field, for reproducibility checks.
    pub fn payload(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing_ms");
        }
        Ok(serde_json::to_string(&v)?)
    }
}
