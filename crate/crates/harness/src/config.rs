//! Declarative experiment descriptions.
//!
//! An experiment is one closed-loop scenario plus the list of predictions to
//! check against it. On disk it is a small TOML file:
//!
//! ```toml
//! name = "relay-constant-1"
//! predictions = ["chattering", "bias_constant"]
//!
//! [scenario]
//! controller = "relay"
//! eta = 1.0
//!
//! [tolerances]
//! bias = 15.0
//! ```
//!
//! Every scenario key is optional and defaults to the relay loop with
//! `ρ = 5`, `μ = 0.05`, `Ts = 1e-4` and a 40 s horizon.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smc_chatter::{total_deviation_window, ControllerKind, Scenario};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionKind {
    Chattering,
    BiasConstant,
    BiasSinusoidal,
    Bode,
    TotalDeviation,
    Loeb,
}

/// Acceptance bounds. Relative bounds are percentages of the predicted value;
/// `phase_deg` and `absolute` are in the units of the compared quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub frequency: f64,
    pub amplitude: f64,
    pub tracking_amplitude: f64,
    pub bias: f64,
    pub total_deviation: f64,
    pub phase_deg: f64,
    /// Used instead of a relative bound when the prediction is exactly zero.
    pub absolute: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            frequency: 5.0,
            amplitude: 5.0,
            tracking_amplitude: 10.0,
            bias: 15.0,
            total_deviation: 15.0,
            phase_deg: 2.0,
            absolute: 5e-3,
        }
    }
}

/// Scenario section of a config file; unset keys fall back to [`Scenario::relay`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScenarioFile {
    controller: ControllerKind,
    rho: f64,
    mu: f64,
    b: f64,
    eta: f64,
    omega: f64,
    ts: f64,
    t_final: f64,
    sigma_init: f64,
    z_init: [f64; 2],
    u_init: f64,
    divergence_bound: f64,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Scenario::relay(5.0, 0.05).into()
    }
}

impl From<Scenario> for ScenarioFile {
    fn from(s: Scenario) -> Self {
        Self {
            controller: s.controller,
            rho: s.rho,
            mu: s.mu,
            b: s.b,
            eta: s.eta,
            omega: s.omega,
            ts: s.ts,
            t_final: s.t_final,
            sigma_init: s.sigma_init,
            z_init: s.z_init,
            u_init: s.u_init,
            divergence_bound: s.divergence_bound,
        }
    }
}

impl From<ScenarioFile> for Scenario {
    fn from(f: ScenarioFile) -> Self {
        Scenario {
            controller: f.controller,
            rho: f.rho,
            mu: f.mu,
            b: f.b,
            eta: f.eta,
            omega: f.omega,
            ts: f.ts,
            t_final: f.t_final,
            sigma_init: f.sigma_init,
            z_init: f.z_init,
            u_init: f.u_init,
            divergence_bound: f.divergence_bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    name: String,
    #[serde(default)]
    predictions: BTreeSet<PredictionKind>,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    #[serde(default = "default_settle_fraction")]
    settle_fraction: f64,
    #[serde(default)]
    scenario: ScenarioFile,
    #[serde(default)]
    tolerances: Tolerances,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_settle_fraction() -> f64 {
    smc_chatter::DEFAULT_SETTLE_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SpecFile", into = "SpecFile")]
pub struct ExperimentSpec {
    pub name: String,
    pub scenario: Scenario,
    pub predictions: BTreeSet<PredictionKind>,
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
    /// Leading fraction of the horizon discarded before measuring.
    pub settle_fraction: f64,
}

impl From<SpecFile> for ExperimentSpec {
    fn from(f: SpecFile) -> Self {
        Self {
            name: f.name,
            scenario: f.scenario.into(),
            predictions: f.predictions,
            tolerances: f.tolerances,
            output_dir: f.output_dir,
            settle_fraction: f.settle_fraction,
        }
    }
}

impl From<ExperimentSpec> for SpecFile {
    fn from(s: ExperimentSpec) -> Self {
        Self {
            name: s.name,
            predictions: s.predictions,
            output_dir: s.output_dir,
            settle_fraction: s.settle_fraction,
            scenario: s.scenario.into(),
            tolerances: s.tolerances,
        }
    }
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, scenario: Scenario) -> Self {
        Self {
            name: name.into(),
            scenario,
            predictions: BTreeSet::new(),
            tolerances: Tolerances::default(),
            output_dir: default_output_dir(),
            settle_fraction: default_settle_fraction(),
        }
    }

    pub fn predict(mut self, kinds: impl IntoIterator<Item = PredictionKind>) -> Self {
        self.predictions.extend(kinds);
        self
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Canonical text form; every key is written out.
    pub fn to_toml(&self) -> Result<String, HarnessError> {
        Ok(toml::to_string(self)?)
    }

    /// Git-style object hash of the canonical config: SHA-256 over
    /// `"blob <len>\0"` followed by the text.
    pub fn content_hash(&self) -> Result<String, HarnessError> {
        Ok(content_hash(self.to_toml()?.as_bytes()))
    }

    /// Checks that every requested prediction makes sense for the scenario.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |reason: &str| Err(HarnessError::invalid(&self.name, reason));
        if self.name.trim().is_empty() {
            return bad("name must not be empty");
        }
        if let Err(e) = self.scenario.validate() {
            return Err(HarnessError::invalid(&self.name, e.to_string()));
        }
        if !(0.0..1.0).contains(&self.settle_fraction) {
            return bad("settle_fraction must lie in [0, 1)");
        }
        let t = &self.tolerances;
        let bounds = [
            t.frequency,
            t.amplitude,
            t.tracking_amplitude,
            t.bias,
            t.total_deviation,
            t.phase_deg,
            t.absolute,
        ];
        if bounds.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return bad("tolerances must be positive and finite");
        }
        let sc = &self.scenario;
        let needs_model = self.predictions.iter().any(|p| *p != PredictionKind::Loeb);
        if !self.predictions.is_empty() && !(sc.mu > 0.0) && needs_model {
            return bad("predictions need a positive actuator time constant");
        }
        for p in &self.predictions {
            match p {
                PredictionKind::BiasSinusoidal if !(sc.omega > 0.0) => {
                    return bad("bias_sinusoidal needs a disturbance frequency omega > 0");
                }
                PredictionKind::BiasConstant if sc.omega != 0.0 => {
                    return bad("bias_constant needs a constant disturbance (omega = 0)");
                }
                PredictionKind::TotalDeviation
                    if total_deviation_window(sc.omega, sc.mu) > sc.t_final * (1.0 - self.settle_fraction) =>
                {
                    return bad("horizon too short for the total-deviation window after settling");
                }
                PredictionKind::Loeb if !(sc.mu > 0.0) => {
                    return bad("loeb needs a positive actuator time constant");
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Hex SHA-256 of `"blob <len>\0" + bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
