//! Checkers for the structural conditions and the quantitative laws of the flow.

mod checks;
mod lifespan;
mod oracle;
pub mod residuals;

pub use checks::{
    check_mean_curvature_growth, check_strong_volume_decay, check_tau_law, check_timelike_convergence,
    check_volume_law, measured_rate, probe_mean_curvature_barrier, volume_identity_residual, DEFAULT_BARRIER_THRESHOLD,
};
pub use lifespan::{lifespan_bound_check, time_function_lookup};
pub use oracle::{dopri5, homogeneous_oracle, Dopri5Options, OdeSolution};
pub use residuals::{residual_hinv_evolution, residual_log_volume_rate, residual_metric_evolution};

use crate::error::{ImcfError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Where the worst sample of a check was found: a time coordinate and a spatial point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Location {
    pub time: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub worst_value: f64,
    pub worst_location: Location,
    pub samples: usize,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub details: BTreeMap<String, f64>,
    /// Optional `(coordinate, value)` profile behind the verdict.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub profile: Vec<[f64; 2]>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, passed: bool, worst_value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed,
            worst_value,
            worst_location: Location::default(),
            samples: 0,
            tolerance,
            seed: None,
            details: BTreeMap::new(),
            profile: Vec::new(),
        }
    }

    pub fn at(mut self, time: f64, x: Vec<f64>) -> Self {
        self.worst_location = Location { time, x };
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

/// Sampled rate data of the strong volume decay condition on `[tau0, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub tau0: f64,
    pub b: f64,
    pub tau_samples: Vec<f64>,
    /// `inf_x e^psi H-bar` at each sample.
    pub inf_e_h: Vec<f64>,
    pub phi: Vec<f64>,
    /// `int_{tau0}^{tau} phi`
    pub partial_integrals: Vec<f64>,
}

/// `tau = 1 - e^{-t/d}`.
pub fn tau_of_t(t: f64, d: usize) -> Result<f64> {
    if !(t >= 0.0) || d == 0 {
        return Err(ImcfError::Range(format!("tau_of_t needs t >= 0 and d >= 1 (t = {t}, d = {d})")));
    }
    Ok(-(-t / d as f64).exp_m1())
}

/// Inverse of [`tau_of_t`] on `[0, 1)`.
pub fn t_of_tau(tau: f64, d: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&tau) || d == 0 {
        return Err(ImcfError::Range(format!("t_of_tau needs tau in [0, 1) and d >= 1 (tau = {tau}, d = {d})")));
    }
    Ok(-(d as f64) * (-tau).ln_1p())
}

#[cfg(test)]
mod tests;
