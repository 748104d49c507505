//! End-to-end checks: simulate the loop, measure the chattering, compare with
//! the describing-function predictions.

use smc_chatter::*;

const RHO: f64 = 5.0;
const MU: f64 = 0.05;

fn rel_err(predicted: f64, measured: f64) -> f64 {
    (predicted - measured).abs() / predicted.abs()
}

fn settled(sc: &Scenario) -> Features {
    let tr = simulate(sc).expect("simulation runs");
    extract_features(&tr, DEFAULT_SETTLE_FRACTION).expect("limit cycle present")
}

fn slow_fit(f: &Features, channel: Channel, omega: f64) -> SlowFit<f64> {
    let t: Vec<f64> = f.cycles.iter().map(|c| c.t_mid).collect();
    let v: Vec<f64> = f
        .cycles
        .iter()
        .map(|c| match channel {
            Channel::Tracking => c.sigma_mean,
            Channel::Sliding => c.sliding_mean,
        })
        .collect();
    fit_slow_component(&t, &v, omega).unwrap()
}

#[test]
fn relay_chattering_prediction_errors() {
    let f = settled(&Scenario::relay(RHO, MU));
    let p = chattering_relay(RHO, MU).unwrap();
    let ew = 100.0 * rel_err(p.omega_star, f.frequency);
    let ea = 100.0 * rel_err(p.amplitude_star, f.amplitude);
    assert!((ew - 2.435).abs() < 0.3, "frequency error {ew}%");
    assert!((ea - 4.023).abs() < 0.5, "amplitude error {ea}%");
    assert!(f.bias.abs() < 1e-3);
    assert!((f.duty_cycle - 0.5).abs() < 0.01);
}

#[test]
fn lipschitz_chattering_prediction_errors() {
    let f = settled(&Scenario::lipschitz(RHO, MU, 1.0).with_disturbance(1.0, 0.0));
    let p = chattering_lipschitz(RHO, MU, 1.0).unwrap();
    assert!((100.0 * rel_err(p.omega_star, f.frequency) - 2.609).abs() < 0.3);
    assert!((100.0 * rel_err(p.amplitude_star, f.amplitude) - 4.129).abs() < 0.5);
    assert!((100.0 * rel_err(p.tracking_amplitude_star, f.tracking_amplitude) - 8.602).abs() < 1.0);
    // the integral action removes a constant disturbance
    assert!(f.bias.abs() < 1e-3, "bias {}", f.bias);
}

#[test]
fn constant_disturbance_bias_is_overestimated() {
    let model = build_model(ControllerKind::Relay, RHO, MU, 0.0).unwrap();
    let mut errs = Vec::new();
    for eta in [1.0, 2.0, 3.0] {
        let f = settled(&Scenario::relay(RHO, MU).with_disturbance(eta, 0.0));
        let pred = bias_constant(&model, eta).unwrap().tracking;
        assert!(f.bias > 0.0 && f.bias < pred);
        // average control must cancel the disturbance
        assert!((f.u0_avg - eta).abs() < 1e-3);
        errs.push(rel_err(pred, f.bias));
    }
    assert!(errs.windows(2).all(|w| w[0] < w[1]), "errors grow with η: {errs:?}");
    assert!(errs[0] < 0.15);
}

#[test]
fn positive_command_fraction_tracks_disturbance() {
    // the relay sits at +ρ long enough to average out η: d·ρ - (1-d)·ρ = η
    for eta in [1.0, 2.0] {
        let f = settled(&Scenario::relay(RHO, MU).with_disturbance(eta, 0.0));
        assert!(
            (f.duty_cycle - 0.5 * (1.0 + eta / RHO)).abs() < 0.01,
            "duty {}",
            f.duty_cycle
        );
    }
}

#[test]
fn relay_sinusoidal_bias_phase_and_magnitude() {
    let model = build_model(ControllerKind::Relay, RHO, MU, 0.0).unwrap();
    for eta in [1.0, 2.0] {
        let f = settled(&Scenario::relay(RHO, MU).with_disturbance(eta, 2.0));
        let p = bias_sinusoidal(&model, eta, 2.0).unwrap().tracking;
        let fit = slow_fit(&f, Channel::Tracking, 2.0);
        assert!(rel_err(p.magnitude, f.peak_bias) < 0.15);
        assert!((fit.phase_deg - p.phase_deg).abs() < 1.5, "phase {}", fit.phase_deg);
    }
}

#[test]
fn lipschitz_sinusoidal_bias_on_both_channels() {
    let model = build_model(ControllerKind::LipschitzContinuous, RHO, MU, 1.0).unwrap();
    for eta in [1.0 / 3.0, 2.0 / 3.0, 1.0] {
        let f = settled(&Scenario::lipschitz(RHO, MU, 1.0).with_disturbance(eta, 2.0));
        let p = bias_sinusoidal(&model, eta, 2.0).unwrap();
        let s = p.sliding.unwrap();
        assert!(rel_err(s.magnitude, f.peak_sliding_bias) < 0.17);
        assert!(rel_err(p.tracking.magnitude, f.peak_bias) < 0.18);
        assert!((slow_fit(&f, Channel::Sliding, 2.0).phase_deg - s.phase_deg).abs() < 1.5);
        assert!((slow_fit(&f, Channel::Tracking, 2.0).phase_deg - p.tracking.phase_deg).abs() < 1.5);
    }
}

#[test]
fn low_frequency_total_deviation_for_small_disturbance() {
    let model = build_model(ControllerKind::Relay, RHO, MU, 0.0).unwrap();
    let omega = 0.5;
    let sc = Scenario::relay(RHO, MU).with_disturbance(1.0, omega).with_horizon(40.0);
    let tr = simulate(&sc).unwrap();
    let sim = total_deviation(&tr, omega, MU).unwrap();
    let pred = total_deviation_prediction(&model, 1.0, omega).unwrap();
    assert!(!pred.qualitative);
    assert!(rel_err(pred.value, sim) < 0.05, "{sim} vs {}", pred.value);
}

#[test]
fn partial_recording_matches_full_run() {
    let sc = Scenario::relay(RHO, MU).with_disturbance(1.0, 2.0).with_horizon(10.0);
    let full = simulate(&sc).unwrap();
    let tail = simulate_recording_from(&sc, 6.0).unwrap();
    let off = tail.start_index;
    assert_eq!(&full.sigma[off..], &tail.sigma[..]);
    assert_eq!(
        total_deviation(&full, 2.0, MU).unwrap(),
        total_deviation(&tail, 2.0, MU).unwrap()
    );
}

#[test]
fn single_precision_loop_chatters_at_the_same_frequency() {
    let sc = SimScenario::<f32>::relay(5.0, 0.05).with_horizon(10.0);
    let tr = simulate(&sc).unwrap();
    let f = extract_features(&tr, 0.5).unwrap();
    let p = chattering_relay(5.0_f32, 0.05).unwrap();
    assert!((f.frequency - p.omega_star).abs() / p.omega_star < 0.05);
    assert!((f.amplitude - p.amplitude_star).abs() / p.amplitude_star < 0.06);
}
