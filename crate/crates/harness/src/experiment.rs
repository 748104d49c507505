//! Runs one experiment: simulate, measure, predict, compare.

use smc_chatter::{
    bias_constant, bias_sinusoidal, build_model, chattering_lipschitz, chattering_relay, extract_features,
    fit_slow_component, lipschitz_linear_block, relay_linear_block, simulate_recording_from, solve_hb_on,
    total_deviation_on, total_deviation_prediction, validity_max_frequency, Channel, ControllerKind, Features, HbError,
    Model, SearchGrid, Trace,
};

use crate::config::{ExperimentSpec, PredictionKind};
use crate::error::{Context, HarnessError};
use crate::report::{ComparisonReport, LoebReport, Metadata, QuantityComparison, ValidityFlags};

/// Everything produced by one run. The trace holds only the post-settling part.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ComparisonReport,
    pub trace: Trace,
    pub features: Features,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ComparisonReport, HarnessError> {
    run_experiment_detailed(spec).map(|o| o.report)
}

/// Least-squares fit of the per-cycle means on `channel` at the disturbance frequency.
pub fn fitted_slow_phase(features: &Features, channel: Channel, omega: f64) -> Option<f64> {
    let t: Vec<f64> = features.cycles.iter().map(|c| c.t_mid).collect();
    let v: Vec<f64> = features
        .cycles
        .iter()
        .map(|c| match channel {
            Channel::Tracking => c.sigma_mean,
            Channel::Sliding => c.sliding_mean,
        })
        .collect();
    fit_slow_component(&t, &v, omega).ok().map(|f| f.phase_deg)
}

fn wrapped_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

pub fn run_experiment_detailed(spec: &ExperimentSpec) -> Result<ExperimentOutcome, HarnessError> {
    spec.validate()?;
    let name = spec.name.as_str();
    let sc = &spec.scenario;
    let tol = &spec.tolerances;

    // keep memory bounded on long horizons: the total-deviation window always
    // lies in the second half, so nothing before min(settle, 1/2) is needed
    let record_from = sc.t_final * spec.settle_fraction.min(0.5);
    let trace = simulate_recording_from(sc, record_from).within(name)?;
    let features = extract_features(&trace, spec.settle_fraction).within(name)?;

    let mut comparisons = Vec::new();
    let mut validity = ValidityFlags::default();
    let mut loeb = None;
    let mut cached: Option<Model> = None;
    let mut model = || -> Result<Model, HarnessError> {
        if cached.is_none() {
            cached = Some(build_model(sc.controller, sc.rho, sc.mu, sc.b).within(name)?);
        }
        Ok(cached.clone().expect("model built above"))
    };
    let lipschitz = sc.controller == ControllerKind::LipschitzContinuous;

    for kind in &spec.predictions {
        match kind {
            PredictionKind::Chattering => {
                let p = match sc.controller {
                    ControllerKind::Relay => chattering_relay(sc.rho, sc.mu),
                    ControllerKind::LipschitzContinuous => chattering_lipschitz(sc.rho, sc.mu, sc.b),
                }
                .within(name)?;
                comparisons.push(QuantityComparison::relative(
                    "frequency",
                    p.omega_star,
                    features.frequency,
                    tol.frequency,
                    tol.absolute,
                ));
                comparisons.push(QuantityComparison::relative(
                    "amplitude",
                    p.amplitude_star,
                    features.amplitude,
                    tol.amplitude,
                    tol.absolute,
                ));
                if lipschitz {
                    comparisons.push(QuantityComparison::relative(
                        "tracking_amplitude",
                        p.tracking_amplitude_star,
                        features.tracking_amplitude,
                        tol.tracking_amplitude,
                        tol.absolute,
                    ));
                }
            }
            PredictionKind::Loeb => {
                let (w, analytic_stable) = match sc.controller {
                    ControllerKind::Relay => (relay_linear_block(sc.mu), true),
                    ControllerKind::LipschitzContinuous => {
                        (lipschitz_linear_block(sc.mu, sc.b), 1.0 - 2.0 * sc.b * sc.mu > 0.0)
                    }
                };
                let (numeric_stable, numeric_margin) =
                    match solve_hb_on(&w, sc.rho, &SearchGrid::for_time_constant(sc.mu)) {
                        Ok(p) => (p.loeb_stable, Some(p.loeb_margin)),
                        Err(HbError::NoCrossing { .. }) => (false, None),
                        Err(e) => return Err(e).within(name),
                    };
                loeb = Some(LoebReport {
                    analytic_stable,
                    numeric_stable,
                    numeric_margin,
                });
            }
            PredictionKind::BiasConstant => {
                let m = model()?;
                let b = bias_constant(&m, sc.eta).within(name)?;
                comparisons.push(QuantityComparison::relative(
                    "bias",
                    b.tracking,
                    features.bias,
                    tol.bias,
                    tol.absolute,
                ));
                if let Some(s) = b.sliding {
                    comparisons.push(QuantityComparison::relative(
                        "sliding_bias",
                        s,
                        features.sliding_bias,
                        tol.bias,
                        tol.absolute,
                    ));
                }
                validity.eg_valid = Some(b.eg_valid);
                validity.disturbance_ratio = Some(b.disturbance_ratio);
            }
            PredictionKind::BiasSinusoidal => {
                let m = model()?;
                let p = bias_sinusoidal(&m, sc.eta, sc.omega).within(name)?;
                let mut channels = vec![(Channel::Tracking, "bias", p.tracking, features.peak_bias)];
                if let Some(s) = p.sliding {
                    channels.push((Channel::Sliding, "sliding_bias", s, features.peak_sliding_bias));
                }
                for (ch, label, phasor, peak) in channels {
                    comparisons.push(QuantityComparison::relative(
                        &format!("{label}_magnitude"),
                        phasor.magnitude,
                        peak,
                        tol.bias,
                        tol.absolute,
                    ));
                    if let Some(phase) = fitted_slow_phase(&features, ch, sc.omega) {
                        // compare on the circle, report the simulated phase unwrapped next to the prediction
                        let sim = phasor.phase_deg + wrapped_difference(phase, phasor.phase_deg);
                        comparisons.push(QuantityComparison::absolute(
                            &format!("{label}_phase_deg"),
                            phasor.phase_deg,
                            sim,
                            tol.phase_deg,
                        ));
                    }
                }
                let primary = p.sliding.unwrap_or(p.tracking).magnitude;
                validity.band = Some(m.band(sc.omega));
                validity.eg_valid = Some(primary < m.eg_threshold());
                validity.assumption2_valid = Some(m.band(sc.omega) == smc_chatter::Band::LowFrequency);
            }
            PredictionKind::TotalDeviation => {
                let m = model()?;
                let p = total_deviation_prediction(&m, sc.eta, sc.omega).within(name)?;
                let sim = total_deviation_on(&trace, sc.omega, sc.mu, m.primary_channel()).within(name)?;
                let c =
                    QuantityComparison::relative("total_deviation", p.value, sim, tol.total_deviation, tol.absolute);
                comparisons.push(if p.qualitative { c.qualitative() } else { c });
                validity.band = Some(p.band);
                validity.assumption2_valid = Some(!p.qualitative);
            }
            PredictionKind::Bode => {
                let m = model()?;
                validity.validity_max_frequency = Some(validity_max_frequency(&m, sc.eta).within(name)?);
            }
        }
    }

    let mut report = ComparisonReport {
        name: spec.name.clone(),
        metadata: Metadata::new(spec.content_hash()?, spec.scenario.clone()),
        comparisons,
        validity,
        loeb,
        passed: false,
    };
    report.finish();
    Ok(ExperimentOutcome {
        report,
        trace,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_difference_wraps() {
        assert_eq!(wrapped_difference(179.0, -179.0), -2.0);
        assert_eq!(wrapped_difference(-179.0, 179.0), 2.0);
        assert_eq!(wrapped_difference(10.0, 5.0), 5.0);
    }
}
