//! Steady-state chattering measurements on simulated traces.
//!
//! Fast cycles are delimited by upward zero crossings of the switching
//! variable (σ for the relay law, S for the Lipschitz law, i.e. the argument of
//! the sign function). Crossing instants are linearly interpolated between grid
//! points so the period is resolved below the step size.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant_sim::{Channel, SimTrace, TraceView};
use crate::scalar::{wrap_degrees, Scalar};

pub const DEFAULT_SETTLE_FRACTION: f64 = 0.5;

/// Fewest sign changes accepted as a limit cycle.
const MIN_SWITCHINGS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no limit cycle: found {found} switchings, need at least {needed}")]
    NoLimitCycle { found: usize, needed: usize },
    #[error("series spans {span} s but needs at least {needed} s")]
    InsufficientSpan { span: f64, needed: f64 },
    #[error("trace horizon {horizon} s too short for window {window} s")]
    HorizonTooShort { horizon: f64, window: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

/// Per-cycle statistics of one fast oscillation period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSample<T> {
    pub t_start: T,
    pub t_end: T,
    pub t_mid: T,
    pub sigma_mean: T,
    pub sliding_mean: T,
    /// Mean actuator output over the cycle.
    pub u_mean: T,
    pub u_cmd_mean: T,
    /// Half peak-to-peak of the sliding variable, `(Ap + An)/2`.
    pub amplitude: T,
    /// Half peak-to-peak of the tracking error.
    pub tracking_amplitude: T,
    /// Fraction of the cycle with positive switching variable.
    pub duty: T,
}

impl<T: Scalar> CycleSample<T> {
    pub fn period(&self) -> T {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateFeatures<T> {
    /// Fast-oscillation amplitude of the sliding variable.
    pub amplitude: T,
    /// Fast-oscillation amplitude of the tracking error (equals `amplitude` for the relay).
    pub tracking_amplitude: T,
    pub period: T,
    pub frequency: T,
    /// Cycle-averaged tracking error, averaged over all retained cycles.
    pub bias: T,
    /// Cycle-averaged sliding variable.
    pub sliding_bias: T,
    /// Cycle-averaged actuator output.
    pub u0_avg: T,
    pub duty_cycle: T,
    /// Largest |cycle mean of σ|; the bias envelope under sinusoidal disturbances.
    pub peak_bias: T,
    pub peak_sliding_bias: T,
    pub peak_avg_control: T,
    /// Max |σ| over the total-deviation window, when the horizon allows it.
    pub total_dev: Option<T>,
    pub cycles: Vec<CycleSample<T>>,
}

/// Least-squares fit `magnitude·cos(Ωt + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowFit<T> {
    pub magnitude: T,
    /// Degrees in `(-180, 180]`.
    pub phase_deg: T,
    pub frequency: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Crossing<T> {
    /// Interpolated instant.
    t: T,
    /// First sample index at or after the crossing.
    index: usize,
    rising: bool,
}

fn crossings<T: Scalar>(view: &TraceView<'_, T>) -> Vec<Crossing<T>> {
    let s = view.sliding;
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for (i, &v) in s.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        if let Some(j) = last {
            let u = s[j];
            if (u < T::zero()) != (v < T::zero()) {
                let frac = u / (u - v);
                let t = view.time(j) + frac * (view.time(i) - view.time(j));
                out.push(Crossing {
                    t,
                    index: i,
                    rising: v > T::zero(),
                });
            }
        }
        last = Some(i);
    }
    out
}

fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |a, &x| a + x) / T::from_usize_lossy(xs.len().max(1))
}

fn half_span<T: Scalar>(xs: &[T]) -> T {
    let (lo, hi) = xs.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    (hi - lo) / T::lit(2.0)
}

/// One sample per complete fast cycle in `view`.
pub fn cycle_average<T: Scalar>(view: &TraceView<'_, T>) -> Result<Vec<CycleSample<T>>, AnalysisError> {
    let xs = crossings(view);
    let rising: Vec<usize> = xs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.rising)
        .map(|(k, _)| k)
        .collect();
    if rising.len() < 3 {
        return Err(AnalysisError::NoLimitCycle {
            found: xs.len(),
            needed: 4,
        });
    }
    let mut out = Vec::with_capacity(rising.len() - 1);
    for w in rising.windows(2) {
        let (a, b) = (xs[w[0]], xs[w[1]]);
        let range = a.index..b.index;
        if range.is_empty() {
            continue;
        }
        let period = b.t - a.t;
        let fall = xs[w[0] + 1..w[1]].iter().find(|c| !c.rising);
        let duty = fall.map_or(T::one(), |c| (c.t - a.t) / period);
        out.push(CycleSample {
            t_start: a.t,
            t_end: b.t,
            t_mid: (a.t + b.t) / T::lit(2.0),
            sigma_mean: mean(&view.sigma[range.clone()]),
            sliding_mean: mean(&view.sliding[range.clone()]),
            u_mean: mean(&view.u_act[range.clone()]),
            u_cmd_mean: mean(&view.u_cmd[range.clone()]),
            amplitude: half_span(&view.sliding[range.clone()]),
            tracking_amplitude: half_span(&view.sigma[range]),
            duty,
        });
    }
    if out.len() < 2 {
        return Err(AnalysisError::NoLimitCycle {
            found: xs.len(),
            needed: 4,
        });
    }
    Ok(out)
}

/// Measures the steady-state chattering of a trace after discarding the first
/// `settle_fraction` of its horizon.
pub fn extract_features<T: Scalar>(
    trace: &SimTrace<T>,
    settle_fraction: T,
) -> Result<SteadyStateFeatures<T>, AnalysisError> {
    if !(settle_fraction >= T::zero() && settle_fraction < T::one()) {
        return Err(AnalysisError::InvalidArgument("settle fraction must lie in [0, 1)"));
    }
    let view = trace.settled(settle_fraction);
    let switchings = crossings(&view).len();
    if switchings < MIN_SWITCHINGS {
        return Err(AnalysisError::NoLimitCycle {
            found: switchings,
            needed: MIN_SWITCHINGS,
        });
    }
    let cycles = cycle_average(&view)?;
    let n = T::from_usize_lossy(cycles.len());
    let avg = |f: fn(&CycleSample<T>) -> T| cycles.iter().map(f).fold(T::zero(), |a, x| a + x) / n;
    let peak = |f: fn(&CycleSample<T>) -> T| cycles.iter().map(f).fold(T::zero(), |a, x| a.max(x.abs()));

    let t_first = cycles[0].t_start;
    let t_last = cycles[cycles.len() - 1].t_end;
    let period = (t_last - t_first) / n;
    let total_dev = total_deviation(trace, trace.scenario.omega, trace.scenario.mu).ok();

    Ok(SteadyStateFeatures {
        amplitude: avg(|c| c.amplitude),
        tracking_amplitude: avg(|c| c.tracking_amplitude),
        period,
        frequency: T::lit(2.0) * T::PI() / period,
        bias: avg(|c| c.sigma_mean),
        sliding_bias: avg(|c| c.sliding_mean),
        u0_avg: avg(|c| c.u_mean),
        duty_cycle: avg(|c| c.duty),
        peak_bias: peak(|c| c.sigma_mean),
        peak_sliding_bias: peak(|c| c.sliding_mean),
        peak_avg_control: peak(|c| c.u_mean),
        total_dev,
        cycles,
    })
}

/// Fits `m·cos(Ωt + φ)` to `(t, value)` samples by linear least squares on the
/// `cos(Ωt)`, `sin(Ωt)` basis.
pub fn fit_slow_component<T: Scalar>(times: &[T], values: &[T], omega: T) -> Result<SlowFit<T>, AnalysisError> {
    if times.len() != values.len() {
        return Err(AnalysisError::InvalidArgument("times and values differ in length"));
    }
    if !(omega > T::zero()) {
        return Err(AnalysisError::InvalidArgument("fit frequency must be positive"));
    }
    let needed = T::lit(2.0) * T::PI() / omega;
    let span = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) if times.len() >= 3 => b - a,
        _ => T::zero(),
    };
    if span < needed {
        return Err(AnalysisError::InsufficientSpan {
            span: span.as_f64(),
            needed: needed.as_f64(),
        });
    }
    // value ≈ p·cos(Ωt) + q·sin(Ωt);  m cos(Ωt + φ) = m cosφ cos(Ωt) - m sinφ sin(Ωt)
    let (mut cc, mut cs, mut ss, mut yc, mut ys) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for (&t, &y) in times.iter().zip(values) {
        let (s, c) = (omega * t).sin_cos();
        cc += c * c;
        cs += c * s;
        ss += s * s;
        yc += y * c;
        ys += y * s;
    }
    let det = cc * ss - cs * cs;
    if det.abs() <= T::epsilon() * cc * ss {
        return Err(AnalysisError::InvalidArgument("degenerate sampling for the fit"));
    }
    let p = (yc * ss - ys * cs) / det;
    let q = (ys * cc - yc * cs) / det;
    let magnitude = p.hypot(q);
    let phase = if magnitude.is_zero() {
        T::zero()
    } else {
        (-q).atan2(p).to_degrees()
    };
    Ok(SlowFit {
        magnitude,
        phase_deg: wrap_degrees(phase),
        frequency: omega,
    })
}

/// Window length of the total-deviation measure: one disturbance period plus
/// one chattering period `2πμ`. A constant disturbance has no slow period, so
/// the window is two chattering periods.
pub fn total_deviation_window<T: Scalar>(omega: T, mu: T) -> T {
    let two_pi = T::lit(2.0) * T::PI();
    if omega > T::zero() {
        two_pi * (T::one() / omega + mu)
    } else {
        T::lit(2.0) * two_pi * mu
    }
}

/// `max |σ(t)|` over the final window of the scenario horizon.
///
/// The window must fit in the second half of the horizon, so that at least
/// half the run is available for settling.
pub fn total_deviation<T: Scalar>(trace: &SimTrace<T>, omega: T, mu: T) -> Result<T, AnalysisError> {
    total_deviation_on(trace, omega, mu, Channel::Tracking)
}

/// [`total_deviation`] measured on either the tracking error or the sliding variable.
pub fn total_deviation_on<T: Scalar>(
    trace: &SimTrace<T>,
    omega: T,
    mu: T,
    channel: Channel,
) -> Result<T, AnalysisError> {
    let window = total_deviation_window(omega, mu).max(trace.ts());
    let horizon = trace.scenario.time_at(trace.scenario.step_count() - 1);
    let too_short = || AnalysisError::HorizonTooShort {
        horizon: horizon.as_f64(),
        window: window.as_f64(),
    };
    if window > horizon / T::lit(2.0) || trace.is_empty() {
        return Err(too_short());
    }
    let from = horizon - window;
    let first = trace.time(0);
    let last = trace.time(trace.len() - 1);
    if first > from + trace.ts() || last + trace.ts() < horizon {
        return Err(too_short());
    }
    let skip = ((from - first) / trace.ts())
        .floor()
        .max(T::zero())
        .to_usize()
        .unwrap_or(0);
    let signal = match channel {
        Channel::Tracking => &trace.sigma,
        Channel::Sliding => &trace.sliding,
    };
    Ok(signal[skip.min(trace.len())..]
        .iter()
        .fold(T::zero(), |m, s| m.max(s.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant_sim::{ControllerKind, SimScenario};
    use std::f64::consts::PI;

    /// Synthetic relay-like trace: σ = bias + A sin(ωt), ū = ρ sign(σ).
    fn synthetic(bias: f64, amp: f64, omega: f64, horizon: f64) -> SimTrace<f64> {
        let sc = SimScenario::relay(5.0_f64, 0.05).with_horizon(horizon).with_step(1e-4);
        let n = sc.step_count();
        let mut tr = SimTrace {
            scenario: sc.clone(),
            start_index: 0,
            sigma: Vec::with_capacity(n),
            sliding: Vec::new(),
            u_cmd: Vec::new(),
            u_act: Vec::new(),
            f: vec![0.0; n],
        };
        for k in 0..n {
            let t = sc.time_at(k);
            let s = bias + amp * (omega * t).sin();
            tr.sigma.push(s);
            tr.u_cmd.push(5.0 * crate::scalar::sign(s));
        }
        tr.sliding = tr.sigma.clone();
        tr.u_act = tr.u_cmd.clone();
        tr
    }

    #[test]
    fn synthetic_waveform_recovered() {
        let (bias, amp, omega) = (0.04, 0.16, 19.2);
        let tr = synthetic(bias, amp, omega, 10.0);
        let f = extract_features(&tr, 0.5).unwrap();
        // duty of a biased sine: 1/2 + asin(bias/amp)/π
        let duty = 0.5 + (bias / amp).asin() / PI;
        assert!((f.amplitude - amp).abs() / amp < 5e-3);
        assert!((f.frequency - omega).abs() / omega < 5e-3);
        assert!((f.bias - bias).abs() / bias < 5e-3);
        assert!((f.duty_cycle - duty).abs() / duty < 5e-3);
        // average of ρ sign(σ) is (2ρ/π) asin(bias/amp)
        let u0 = 10.0 / PI * (bias / amp).asin();
        assert!((f.u0_avg - u0).abs() / u0 < 5e-3);
    }

    #[test]
    fn symmetric_waveform_has_no_bias() {
        let tr = synthetic(0.0, 0.16, 20.0, 10.0);
        let f = extract_features(&tr, 0.5).unwrap();
        assert!(f.bias.abs() < 1e-3);
        assert!((f.duty_cycle - 0.5).abs() < 1e-3);
    }

    #[test]
    fn flat_trace_is_not_a_limit_cycle() {
        let tr = synthetic(1.0, 0.0, 20.0, 2.0);
        assert!(matches!(
            extract_features(&tr, 0.5),
            Err(AnalysisError::NoLimitCycle { .. })
        ));
    }

    #[test]
    fn constant_command_cycle_mean() {
        let mut tr = synthetic(0.0, 0.1, 20.0, 2.0);
        tr.u_act.iter_mut().for_each(|u| *u = 5.0);
        let cycles = cycle_average(&tr.view()).unwrap();
        assert!(cycles.iter().all(|c| c.u_mean == 5.0));
    }

    #[test]
    fn fit_recovers_own_model() {
        let t: Vec<f64> = (0..200).map(|i| 0.02 + 0.0331 * i as f64).collect();
        let y: Vec<f64> = t.iter().map(|&t| 0.05 * (2.0 * t + 10f64.to_radians()).cos()).collect();
        let fit = fit_slow_component(&t, &y, 2.0).unwrap();
        assert!((fit.magnitude - 0.05).abs() < 1e-6);
        assert!((fit.phase_deg - 10.0).abs() < 1e-6);
    }

    #[test]
    fn fit_is_amplitude_linear() {
        let t: Vec<f64> = (0..100).map(|i| 0.07 * i as f64).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|&t| 0.3 * (2.0 * t - 1.0).cos() + 0.01 * (40.0 * t).sin())
            .collect();
        let a = fit_slow_component(&t, &y, 2.0).unwrap();
        for c in [0.1, 3.0, 17.0] {
            let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
            let b = fit_slow_component(&t, &yc, 2.0).unwrap();
            assert!((b.magnitude - c * a.magnitude).abs() < 1e-12 * c);
            assert!((b.phase_deg - a.phase_deg).abs() < 1e-9);
        }
    }

    #[test]
    fn fit_rejects_short_span() {
        let t = [0.0, 0.1, 0.2, 0.3];
        let y = [0.0; 4];
        assert!(matches!(
            fit_slow_component(&t, &y, 2.0),
            Err(AnalysisError::InsufficientSpan { .. })
        ));
    }

    #[test]
    fn total_deviation_of_two_tone_signal() {
        let sc = SimScenario::relay(5.0_f64, 0.05)
            .with_disturbance(1.0, 2.0)
            .with_horizon(10.0)
            .with_step(1e-4);
        let n = sc.step_count();
        let sig: Vec<f64> = (0..n)
            .map(|k| {
                let t = sc.time_at(k);
                0.05 * (2.0 * t).cos() + 0.159 * (20.0 * t).sin()
            })
            .collect();
        let tr = SimTrace {
            scenario: sc,
            start_index: 0,
            sliding: sig.clone(),
            u_cmd: vec![0.0; n],
            u_act: vec![0.0; n],
            f: vec![0.0; n],
            sigma: sig,
        };
        // dense oracle over one full slow period
        let oracle = (0..2_000_000)
            .map(|i| {
                let t = i as f64 * PI / 2_000_000.0;
                (0.05 * (2.0 * t).cos() + 0.159 * (20.0 * t).sin()).abs()
            })
            .fold(0.0, f64::max);
        let td = total_deviation(&tr, 2.0, 0.05).unwrap();
        assert!((td - oracle).abs() / oracle < 1e-4);
        assert!((td - 0.209).abs() / 0.209 < 0.01);
    }

    #[test]
    fn total_deviation_zero_trace_and_short_horizon() {
        let mut tr = synthetic(0.0, 0.0, 1.0, 10.0);
        tr.sigma.iter_mut().for_each(|s| *s = 0.0);
        assert_eq!(total_deviation(&tr, 0.0, 0.05).unwrap(), 0.0);
        assert!(matches!(
            total_deviation(&tr, 0.1, 0.05),
            Err(AnalysisError::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn lipschitz_switching_uses_sliding_variable() {
        let sc = SimScenario::lipschitz(5.0, 0.05, 1.0).with_horizon(8.0);
        assert_eq!(sc.controller, ControllerKind::LipschitzContinuous);
        let tr = crate::plant_sim::simulate(&sc).unwrap();
        let f = extract_features(&tr, 0.5).unwrap();
        assert!(f.amplitude > 10.0 * f.tracking_amplitude);
        assert!(f.frequency > 15.0 && f.frequency < 20.0);
    }
}
