//! Prediction-versus-simulation reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use smc_chatter::{Band, Scenario, ValidityLimit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Outside the regime where the prediction is claimed to hold; reported only.
    Qualitative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceKind {
    /// Percent of the predicted value.
    RelativePercent,
    Absolute,
}

/// One predicted/simulated pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityComparison {
    pub quantity: String,
    pub predicted: f64,
    pub simulated: f64,
    pub abs_error: f64,
    /// `|pred − sim| / |sim|` in percent; absent when the simulated value is zero.
    pub rel_error_pct: Option<f64>,
    /// `|pred − sim| / |pred|` in percent, the normalization of the reference tables.
    pub error_pct_vs_predicted: Option<f64>,
    pub tolerance: f64,
    pub tolerance_kind: ToleranceKind,
    pub verdict: Verdict,
}

fn pct(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| 100.0 * num / den.abs())
}

impl QuantityComparison {
    /// Judged on the error relative to the prediction; falls back to
    /// `absolute` when the prediction is zero.
    pub fn relative(quantity: &str, predicted: f64, simulated: f64, tolerance_pct: f64, absolute: f64) -> Self {
        let abs_error = (predicted - simulated).abs();
        let vs_pred = pct(abs_error, predicted);
        let (tolerance, tolerance_kind, ok) = match vs_pred {
            Some(e) => (tolerance_pct, ToleranceKind::RelativePercent, e <= tolerance_pct),
            None => (absolute, ToleranceKind::Absolute, abs_error <= absolute),
        };
        Self {
            quantity: quantity.to_owned(),
            predicted,
            simulated,
            abs_error,
            rel_error_pct: pct(abs_error, simulated),
            error_pct_vs_predicted: vs_pred,
            tolerance,
            tolerance_kind,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        }
    }

    pub fn absolute(quantity: &str, predicted: f64, simulated: f64, tolerance: f64) -> Self {
        let abs_error = (predicted - simulated).abs();
        Self {
            quantity: quantity.to_owned(),
            predicted,
            simulated,
            abs_error,
            rel_error_pct: pct(abs_error, simulated),
            error_pct_vs_predicted: pct(abs_error, predicted),
            tolerance,
            tolerance_kind: ToleranceKind::Absolute,
            verdict: if abs_error <= tolerance {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        }
    }

    pub fn qualitative(mut self) -> Self {
        self.verdict = Verdict::Qualitative;
        self
    }
}

/// Regime flags from the sensitivity model, echoed so a reader can tell which
/// comparisons are expected to hold.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidityFlags {
    pub band: Option<Band>,
    /// Predicted bias below two thirds of the chattering amplitude.
    pub eg_valid: Option<bool>,
    /// Disturbance frequency below a tenth of the chattering frequency.
    pub assumption2_valid: Option<bool>,
    /// `|η| / (A*·Kn)`.
    pub disturbance_ratio: Option<f64>,
    pub validity_max_frequency: Option<ValidityLimit<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoebReport {
    /// Verdict from the closed-form sign condition.
    pub analytic_stable: bool,
    /// Verdict from the numeric harmonic-balance search.
    pub numeric_stable: bool,
    /// Finite-difference margin at the numeric root, when one exists.
    pub numeric_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_hash: String,
    /// Package name to version.
    pub versions: BTreeMap<String, String>,
    pub scenario: Scenario,
}

impl Metadata {
    pub fn new(config_hash: String, scenario: Scenario) -> Self {
        let versions = BTreeMap::from([
            ("smc-chatter".to_owned(), smc_chatter::VERSION.to_owned()),
            ("smc-harness".to_owned(), env!("CARGO_PKG_VERSION").to_owned()),
        ]);
        Self {
            config_hash,
            versions,
            scenario,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub name: String,
    pub metadata: Metadata,
    pub comparisons: Vec<QuantityComparison>,
    pub validity: ValidityFlags,
    pub loeb: Option<LoebReport>,
    pub passed: bool,
}

impl ComparisonReport {
    pub fn get(&self, quantity: &str) -> Option<&QuantityComparison> {
        self.comparisons.iter().find(|c| c.quantity == quantity)
    }

    pub(crate) fn finish(&mut self) {
        let loeb_ok = self.loeb.as_ref().is_none_or(|l| l.analytic_stable == l.numeric_stable);
        self.passed = loeb_ok && self.comparisons.iter().all(|c| c.verdict != Verdict::Fail);
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
