//! Machine-checkable experiment reports. Serialization is deterministic:
//! fixed struct field order, no timestamps, and all reductions computed in
//! sample order, so a rerun with the same config and seed is byte-identical.

use crate::config::ExperimentConfig;
use serde::Serialize;

/// Common header wrapped around every experiment payload.
#[derive(Serialize, Clone, Debug)]
pub struct Report<P: Serialize> {
    pub experiment: String,
    pub code_version: String,
    pub seed: String,
    pub config: ExperimentConfig,
    pub payload: P,
    /// Aggregate verdict over every check in the payload.
    pub pass: bool,
}

impl<P: Serialize> Report<P> {
    pub fn new(experiment: &str, config: &ExperimentConfig, payload: P, pass: bool) -> Self {
        Report {
            experiment: experiment.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed.to_string(),
            config: config.clone(),
            payload,
            pass,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// One named check with its measured numbers.
#[derive(Serialize, Clone, Debug)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub observed: f64,
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn le(name: &str, observed: f64, bound: f64) -> Self {
        Check {
            name: name.to_string(),
            pass: observed <= bound,
            observed,
            bound,
            note: None,
        }
    }

    pub fn ge(name: &str, observed: f64, bound: f64) -> Self {
        Check {
            name: name.to_string(),
            pass: observed >= bound,
            observed,
            bound,
            note: None,
        }
    }

    /// A negative control: the underlying condition must have tripped.
    pub fn control(name: &str, tripped: bool) -> Self {
        Check {
            name: name.to_string(),
            pass: tripped,
            observed: f64::from(u8::from(tripped)),
            bound: 1.0,
            note: Some("negative control: must fail/trip".to_string()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Weighted estimate of one observable at the two time slices.
#[derive(Serialize, Clone, Debug)]
pub struct ObservableRow {
    pub name: String,
    pub mean_t0: f64,
    pub se_t0: f64,
    pub mean_t: f64,
    pub se_t: f64,
    pub z_score: f64,
}

impl ObservableRow {
    pub fn new(name: String, t0: (f64, f64), t1: (f64, f64)) -> Self {
        let denom = (t0.1 * t0.1 + t1.1 * t1.1).sqrt();
        let z = if denom > 0.0 {
            (t1.0 - t0.0) / denom
        } else if (t1.0 - t0.0).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        ObservableRow {
            name,
            mean_t0: t0.0,
            se_t0: t0.1,
            mean_t: t1.0,
            se_t: t1.1,
            z_score: z,
        }
    }
}

/// Invariance experiment payload.
#[derive(Serialize, Clone, Debug)]
pub struct InvariancePayload {
    pub observables: Vec<ObservableRow>,
    pub max_hamiltonian_drift: f64,
    pub max_mass_drift: f64,
    pub conservation_ok: bool,
    pub effective_sample_size: f64,
    pub z_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bonferroni_note: Option<String>,
    pub checks: Vec<Check>,
}
