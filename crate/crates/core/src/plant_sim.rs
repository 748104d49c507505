//! Fixed-step closed-loop simulation.
//!
//! The loop is the first-order error plant `σ' = f - u`, an optional critically
//! damped actuator `u = ū/(μs + 1)^2`, and one of two sliding-mode laws:
//!
//! * relay: `ū = ρ·sign(σ)`
//! * Lipschitz-continuous: `ū' = ρ·sign(S)` with `S = σ' + bσ`, where `σ'` is
//!   taken from the plant equation `f - u` rather than differentiated numerically.
//!
//! Integration is forward Euler. `μ = 0` bypasses the actuator.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{sign, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("simulation diverged at t = {t}: |{state}| = {value} exceeds {bound}")]
    Diverged {
        t: f64,
        state: &'static str,
        value: f64,
        bound: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Relay,
    LipschitzContinuous,
}

/// Which recorded signal a measurement or prediction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// The tracking error σ.
    Tracking,
    /// The sliding variable S (identical to σ for the relay law).
    Sliding,
}

/// Full parameterization of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario<T> {
    pub controller: ControllerKind,
    /// Control gain ρ.
    pub rho: T,
    /// Actuator time constant μ in seconds; zero selects the ideal loop.
    pub mu: T,
    /// Surface slope b (Lipschitz mode only).
    pub b: T,
    /// Disturbance magnitude η.
    pub eta: T,
    /// Disturbance frequency Ω in rad/s; zero gives a constant disturbance.
    pub omega: T,
    /// Integration step.
    pub ts: T,
    pub t_final: T,
    pub sigma_init: T,
    /// Actuator state (position, velocity).
    pub z_init: [T; 2],
    /// Controller integrator initial value (Lipschitz mode only).
    pub u_init: T,
    pub divergence_bound: T,
}

impl<T: Scalar> SimScenario<T> {
    pub fn relay(rho: T, mu: T) -> Self {
        Self {
            controller: ControllerKind::Relay,
            rho,
            mu,
            b: T::zero(),
            eta: T::zero(),
            omega: T::zero(),
            ts: T::lit(1e-4),
            t_final: T::lit(40.0),
            sigma_init: T::one(),
            z_init: [T::zero(); 2],
            u_init: T::zero(),
            divergence_bound: T::lit(1e6),
        }
    }

    pub fn lipschitz(rho: T, mu: T, b: T) -> Self {
        Self {
            controller: ControllerKind::LipschitzContinuous,
            b,
            ..Self::relay(rho, mu)
        }
    }

    pub fn with_disturbance(mut self, eta: T, omega: T) -> Self {
        self.eta = eta;
        self.omega = omega;
        self
    }

    pub fn with_horizon(mut self, t_final: T) -> Self {
        self.t_final = t_final;
        self
    }

    pub fn with_step(mut self, ts: T) -> Self {
        self.ts = ts;
        self
    }

    pub fn with_initial_error(mut self, sigma_init: T) -> Self {
        self.sigma_init = sigma_init;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidScenario(m.to_string()));
        let all_finite = [
            self.rho,
            self.mu,
            self.b,
            self.eta,
            self.omega,
            self.ts,
            self.t_final,
            self.sigma_init,
            self.z_init[0],
            self.z_init[1],
            self.u_init,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !all_finite {
            return bad("non-finite parameter");
        }
        if self.ts <= T::zero() {
            return bad("step ts must be positive");
        }
        if self.t_final <= self.ts {
            return bad("t_final must exceed ts");
        }
        if self.rho < T::zero() {
            return bad("rho must be non-negative");
        }
        if self.mu < T::zero() {
            return bad("mu must be non-negative");
        }
        if self.omega < T::zero() {
            return bad("disturbance frequency must be non-negative");
        }
        if self.controller == ControllerKind::LipschitzContinuous && self.b <= T::zero() {
            return bad("surface slope b must be positive in Lipschitz mode");
        }
        if !(self.divergence_bound > T::zero()) {
            return bad("divergence bound must be positive");
        }
        Ok(())
    }

    /// Number of grid points `⌊t_final/ts⌋ + 1`, robust to the representation
    /// error of ratios such as `40/1e-4`.
    pub fn step_count(&self) -> usize {
        let r = (self.t_final / self.ts).as_f64();
        let n = if (r - r.round()).abs() <= 1e-9 * r.max(1.0) {
            r.round()
        } else {
            r.floor()
        };
        n as usize + 1
    }

    pub fn time_at(&self, k: usize) -> T {
        T::from_usize_lossy(k) * self.ts
    }
}

/// `η·cos(Ωt)`.
#[inline]
pub fn disturbance<T: Scalar>(eta: T, omega: T, t: T) -> T {
    eta * (omega * t).cos()
}

/// One recorded grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T> {
    pub t: T,
    /// Tracking error σ.
    pub sigma: T,
    /// Sliding variable; `S = σ' + bσ` in Lipschitz mode, σ in relay mode.
    pub sliding: T,
    /// Commanded control ū.
    pub u_cmd: T,
    /// Actuator output u.
    pub u_act: T,
    pub f: T,
}

/// Euler stepper over the coupled loop state.
#[derive(Debug, Clone)]
pub struct ClosedLoop<T> {
    scenario: SimScenario<T>,
    k: usize,
    sigma: T,
    z: [T; 2],
    u_int: T,
}

impl<T: Scalar> ClosedLoop<T> {
    pub fn new(scenario: SimScenario<T>) -> Result<Self, SimError> {
        scenario.validate()?;
        Ok(Self {
            k: 0,
            sigma: scenario.sigma_init,
            z: scenario.z_init,
            u_int: scenario.u_init,
            scenario,
        })
    }

    pub fn scenario(&self) -> &SimScenario<T> {
        &self.scenario
    }

    /// Outputs at the current grid point, then advances the state by one step.
    pub fn step(&mut self) -> Result<Sample<T>, SimError> {
        let sc = &self.scenario;
        let t = sc.time_at(self.k);
        let f = disturbance(sc.eta, sc.omega, t);
        let ideal = sc.mu.is_zero();

        let (u_cmd, sliding, u_act) = match sc.controller {
            ControllerKind::Relay => {
                let u_cmd = sc.rho * sign(self.sigma);
                let u_act = if ideal { u_cmd } else { self.z[0] };
                (u_cmd, self.sigma, u_act)
            }
            ControllerKind::LipschitzContinuous => {
                let u_cmd = self.u_int;
                let u_act = if ideal { u_cmd } else { self.z[0] };
                (u_cmd, f - u_act + sc.b * self.sigma, u_act)
            }
        };

        let sample = Sample {
            t,
            sigma: self.sigma,
            sliding,
            u_cmd,
            u_act,
            f,
        };

        let ts = sc.ts;
        if !ideal {
            let mu2 = sc.mu * sc.mu;
            let dz0 = self.z[1];
            let dz1 = (u_cmd - self.z[0] - T::lit(2.0) * sc.mu * self.z[1]) / mu2;
            self.z[0] += ts * dz0;
            self.z[1] += ts * dz1;
        }
        if sc.controller == ControllerKind::LipschitzContinuous {
            self.u_int += ts * sc.rho * sign(sliding);
        }
        self.sigma += ts * (f - u_act);
        self.k += 1;

        self.check_bounds()?;
        Ok(sample)
    }

    fn check_bounds(&self) -> Result<(), SimError> {
        let bound = self.scenario.divergence_bound;
        let states = [
            ("sigma", self.sigma),
            ("z0", self.z[0]),
            ("z1", self.z[1]),
            ("u_int", self.u_int),
        ];
        for (state, v) in states {
            if !v.is_finite() || v.abs() > bound {
                return Err(SimError::Diverged {
                    t: self.scenario.time_at(self.k).as_f64(),
                    state,
                    value: v.as_f64(),
                    bound: bound.as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// Recorded signals on a uniform grid. `start_index` is the grid index of the
/// first stored sample; full-horizon traces start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace<T> {
    pub scenario: SimScenario<T>,
    pub start_index: usize,
    pub sigma: Vec<T>,
    pub sliding: Vec<T>,
    pub u_cmd: Vec<T>,
    pub u_act: Vec<T>,
    pub f: Vec<T>,
}

impl<T: Scalar> SimTrace<T> {
    fn with_capacity(scenario: SimScenario<T>, start_index: usize, n: usize) -> Self {
        Self {
            scenario,
            start_index,
            sigma: Vec::with_capacity(n),
            sliding: Vec::with_capacity(n),
            u_cmd: Vec::with_capacity(n),
            u_act: Vec::with_capacity(n),
            f: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, s: &Sample<T>) {
        self.sigma.push(s.sigma);
        self.sliding.push(s.sliding);
        self.u_cmd.push(s.u_cmd);
        self.u_act.push(s.u_act);
        self.f.push(s.f);
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn ts(&self) -> T {
        self.scenario.ts
    }

    pub fn time(&self, i: usize) -> T {
        self.scenario.time_at(self.start_index + i)
    }

    pub fn view(&self) -> TraceView<'_, T> {
        TraceView {
            ts: self.scenario.ts,
            start_index: self.start_index,
            sigma: &self.sigma,
            sliding: &self.sliding,
            u_cmd: &self.u_cmd,
            u_act: &self.u_act,
        }
    }

    /// The part of the trace after discarding the leading `settle_fraction`
    /// of the scenario horizon.
    pub fn settled(&self, settle_fraction: T) -> TraceView<'_, T> {
        let horizon_steps = self.scenario.step_count() - 1;
        let cut = (settle_fraction.max(T::zero()).min(T::one()) * T::from_usize_lossy(horizon_steps))
            .ceil()
            .to_usize()
            .unwrap_or(0);
        self.view().from_index(cut.saturating_sub(self.start_index))
    }

    /// Writes `t,sigma,S,u_cmd,u_act,f`, keeping every `stride`-th row.
    pub fn write_csv<W: Write>(&self, mut w: W, stride: usize) -> io::Result<()> {
        writeln!(w, "t,sigma,S,u_cmd,u_act,f")?;
        for i in (0..self.len()).step_by(stride.max(1)) {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.time(i),
                self.sigma[i],
                self.sliding[i],
                self.u_cmd[i],
                self.u_act[i],
                self.f[i]
            )?;
        }
        Ok(())
    }
}

/// Borrowed window into a trace, used by the analysis routines.
#[derive(Debug, Clone, Copy)]
pub struct TraceView<'a, T> {
    pub ts: T,
    pub start_index: usize,
    pub sigma: &'a [T],
    pub sliding: &'a [T],
    pub u_cmd: &'a [T],
    pub u_act: &'a [T],
}

impl<'a, T: Scalar> TraceView<'a, T> {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn time(&self, i: usize) -> T {
        T::from_usize_lossy(self.start_index + i) * self.ts
    }

    /// Drops the first `offset` samples.
    pub fn from_index(&self, offset: usize) -> Self {
        let o = offset.min(self.len());
        Self {
            ts: self.ts,
            start_index: self.start_index + o,
            sigma: &self.sigma[o..],
            sliding: &self.sliding[o..],
            u_cmd: &self.u_cmd[o..],
            u_act: &self.u_act[o..],
        }
    }
}

/// Runs the scenario over its whole horizon and records every step.
pub fn simulate<T: Scalar>(scenario: &SimScenario<T>) -> Result<SimTrace<T>, SimError> {
    simulate_recording_from(scenario, T::zero())
}

/// Runs the whole horizon but stores only samples with `t >= record_from`.
/// Long low-frequency runs use this to keep memory bounded.
pub fn simulate_recording_from<T: Scalar>(scenario: &SimScenario<T>, record_from: T) -> Result<SimTrace<T>, SimError> {
    let mut sim = ClosedLoop::new(scenario.clone())?;
    let n = scenario.step_count();
    let first = if record_from <= T::zero() {
        0
    } else {
        (record_from / scenario.ts).ceil().to_usize().unwrap_or(n).min(n)
    };
    let mut trace = SimTrace::with_capacity(scenario.clone(), first, n - first);
    for k in 0..n {
        let s = sim.step()?;
        if k >= first {
            trace.push(&s);
        }
    }
    Ok(trace)
}

/// Runs the scenario and hands every sample to `observe` without storing it.
pub fn simulate_with<T: Scalar, F: FnMut(&Sample<T>)>(
    scenario: &SimScenario<T>,
    mut observe: F,
) -> Result<(), SimError> {
    let mut sim = ClosedLoop::new(scenario.clone())?;
    for _ in 0..scenario.step_count() {
        observe(&sim.step()?);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disturbance_examples() {
        assert_eq!(disturbance(1.0, 0.0, 17.3), 1.0);
        assert_eq!(disturbance(1.0, 2.0, 0.0), 1.0);
        assert!(disturbance(3.0, 2.0, std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn grid_length() {
        let sc = SimScenario::relay(5.0_f64, 0.05);
        assert_eq!(sc.step_count(), 400_001);
        let sc = sc.with_horizon(1.00005).with_step(1e-4);
        assert_eq!(sc.step_count(), 10_001);
    }

    #[test]
    fn relay_command_has_constant_magnitude() {
        let sc = SimScenario::relay(5.0_f64, 0.05)
            .with_disturbance(1.0, 2.0)
            .with_horizon(2.0);
        let tr = simulate(&sc).unwrap();
        assert_eq!(tr.len(), sc.step_count());
        assert!(tr.u_cmd.iter().all(|u| u.abs() == 5.0));
        assert_eq!(tr.sigma, tr.sliding);
    }

    #[test]
    fn ideal_loop_reaches_first_order_accuracy() {
        let sc = SimScenario::relay(5.0_f64, 0.0)
            .with_disturbance(1.0, 2.0)
            .with_horizon(2.0);
        let tr = simulate(&sc).unwrap();
        let reach = (0..tr.len())
            .find(|&i| tr.sigma[i].abs() <= 6.0 * sc.ts)
            .map(|i| tr.time(i))
            .unwrap();
        assert!(reach <= 0.25, "reaching time {reach}");
        let first = (reach / sc.ts).round() as usize;
        assert!(tr.sigma[first..].iter().all(|s| s.abs() <= 6.0 * sc.ts));
    }

    #[test]
    fn ideal_loop_reaching_time_bound() {
        for (eta, omega) in [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)] {
            let sc = SimScenario::relay(5.0_f64, 0.0)
                .with_disturbance(eta, omega)
                .with_horizon(1.0);
            let tr = simulate(&sc).unwrap();
            let bound = 1.0 / (5.0 - eta) + sc.ts;
            let cross = (1..tr.len()).find(|&i| tr.sigma[i] <= 0.0).map(|i| tr.time(i)).unwrap();
            assert!(cross <= bound + 1e-12, "eta {eta}: crossed at {cross}, bound {bound}");
        }
    }

    #[test]
    fn undisturbed_ideal_error_stays_bounded() {
        let sc = SimScenario::relay(5.0_f64, 0.0).with_horizon(1.0);
        let tr = simulate(&sc).unwrap();
        let start = tr.sigma.iter().position(|s| s.abs() < 2.0 * 5.0 * sc.ts).unwrap();
        assert!(tr.sigma[start..].iter().all(|s| s.abs() <= 6.0 * sc.ts));
        for w in tr.sigma[start..].windows(2) {
            assert!(w[1].abs() <= w[0].abs() + 1e-15 || w[1].abs() <= 5.0 * sc.ts);
        }
    }

    #[test]
    fn zero_gain_zero_disturbance_is_frozen() {
        let sc = SimScenario::relay(0.0_f64, 0.05).with_horizon(1.0);
        let tr = simulate(&sc).unwrap();
        assert!(tr.sigma.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn lipschitz_ideal_decays_exponentially() {
        let b = 1.0_f64;
        let sc = SimScenario::lipschitz(5.0_f64, 0.0, b).with_horizon(6.0);
        let tr = simulate(&sc).unwrap();
        // wait until S has collapsed to the step-scale band
        let band = 10.0 * 5.0 * sc.ts;
        let i0 = (0..tr.len())
            .find(|&i| tr.sliding[i..].iter().all(|s| s.abs() < band))
            .unwrap();
        let s0 = tr.sigma[i0];
        let target = s0 / 10.0;
        let i1 = (i0..tr.len()).find(|&i| tr.sigma[i].abs() <= target.abs()).unwrap();
        let rate = (10.0_f64).ln() / (tr.time(i1) - tr.time(i0));
        assert!((rate - b).abs() / b < 0.05, "fitted rate {rate}");
    }

    #[test]
    fn deterministic() {
        let sc = SimScenario::lipschitz(5.0_f64, 0.05, 1.0)
            .with_disturbance(1.0, 2.0)
            .with_horizon(3.0);
        assert_eq!(simulate(&sc).unwrap(), simulate(&sc).unwrap());
    }

    #[test]
    fn unstable_configuration_reports_divergence() {
        // a disturbance stronger than the relay gain drives σ away linearly
        let mut sc = SimScenario::relay(5.0_f64, 0.05)
            .with_disturbance(6.0, 0.0)
            .with_horizon(20.0);
        sc.divergence_bound = 10.0;
        match simulate(&sc) {
            Err(SimError::Diverged { .. }) => {}
            other => panic!("expected divergence, got {:?}", other.map(|t| t.len())),
        }
    }

    #[test]
    fn invalid_scenarios() {
        let base = SimScenario::relay(5.0_f64, 0.05);
        assert!(base.clone().with_step(0.0).validate().is_err());
        assert!(base.clone().with_horizon(1e-5).validate().is_err());
        assert!(SimScenario::lipschitz(5.0_f64, 0.05, 0.0).validate().is_err());
        assert!(SimScenario::relay(5.0_f64, -0.1).validate().is_err());
    }

    #[test]
    fn partial_recording_matches_full() {
        let sc = SimScenario::relay(5.0_f64, 0.05).with_horizon(1.0);
        let full = simulate(&sc).unwrap();
        let tail = simulate_recording_from(&sc, 0.5).unwrap();
        assert_eq!(tail.start_index, 5000);
        assert_eq!(&full.sigma[5000..], &tail.sigma[..]);
        assert_eq!(tail.time(0), full.time(5000));
    }

    #[test]
    fn csv_header_and_stride() {
        let sc = SimScenario::relay(5.0_f64, 0.05).with_horizon(0.001);
        let tr = simulate(&sc).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, 5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,sigma,S,u_cmd,u_act,f");
        assert_eq!(lines.len(), 1 + 3);
        assert!(lines[1].starts_with("0,1,1,5,0,0"));
    }
}
