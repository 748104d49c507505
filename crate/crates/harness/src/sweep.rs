//! Total-deviation frequency sweeps: simulated `max|S|` over one slow period
//! against the predicted `|σ0*(Ω)| + A*`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smc_chatter::{
    build_model, simulate_recording_from, total_deviation_on, total_deviation_prediction, total_deviation_window, Band,
    ControllerKind, Model, Scenario,
};

use crate::error::{Context, HarnessError};

/// Shortest horizon used for any sweep point.
pub const MIN_HORIZON: f64 = 40.0;
/// Longest horizon; at `Ts = 1e-4` this is 2·10⁷ steps.
pub const MAX_HORIZON: f64 = 2000.0;
/// Slow periods covered below `Ω = 0.5`.
pub const SLOW_PERIODS: f64 = 3.0;

/// 40 s for `Ω ≥ 0.5`, otherwise three slow periods, capped at 2000 s.
pub fn default_horizon(omega: f64) -> f64 {
    if omega >= 0.5 || omega <= 0.0 {
        MIN_HORIZON
    } else {
        (SLOW_PERIODS * 2.0 * PI / omega).clamp(MIN_HORIZON, MAX_HORIZON)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRequest {
    pub controller: ControllerKind,
    pub rho: f64,
    pub mu: f64,
    pub b: f64,
    pub etas: Vec<f64>,
    pub omegas: Vec<f64>,
    pub ts: f64,
}

impl SweepRequest {
    pub fn relay(rho: f64, mu: f64, etas: Vec<f64>, omegas: Vec<f64>) -> Self {
        Self {
            controller: ControllerKind::Relay,
            rho,
            mu,
            b: 0.0,
            etas,
            omegas,
            ts: 1e-4,
        }
    }

    fn scenario(&self, eta: f64, omega: f64) -> Scenario {
        let base = match self.controller {
            ControllerKind::Relay => Scenario::relay(self.rho, self.mu),
            ControllerKind::LipschitzContinuous => Scenario::lipschitz(self.rho, self.mu, self.b),
        };
        base.with_disturbance(eta, omega)
            .with_step(self.ts)
            .with_horizon(default_horizon(omega))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eta: f64,
    pub omega: f64,
    pub band: Band,
    pub horizon: f64,
    pub predicted: f64,
    pub simulated: Option<f64>,
    /// Relative to the prediction, in percent (signed: negative means overestimated).
    pub error_pct: Option<f64>,
    /// Outside the low-frequency band; no pass/fail applies.
    pub qualitative: bool,
    pub eg_valid: bool,
    pub assumption2_valid: bool,
    /// Set when the simulation or measurement for this point failed.
    pub failure: Option<String>,
}

fn run_point(req: &SweepRequest, model: &Model, eta: f64, omega: f64) -> Result<SweepPoint, HarnessError> {
    let name = format!("sweep eta={eta} omega={omega}");
    let pred = total_deviation_prediction(model, eta, omega).within(&name)?;
    let sc = req.scenario(eta, omega);
    let slow = pred.value - model.fast_amplitude(model.primary_channel());
    let mut point = SweepPoint {
        eta,
        omega,
        band: pred.band,
        horizon: sc.t_final,
        predicted: pred.value,
        simulated: None,
        error_pct: None,
        qualitative: pred.qualitative,
        eg_valid: slow < model.eg_threshold(),
        assumption2_valid: !pred.qualitative,
        failure: None,
    };
    // only the last window is measured; keep a second one as margin
    let record_from = (sc.t_final - 2.0 * total_deviation_window(omega, req.mu)).max(0.0);
    let measured = simulate_recording_from(&sc, record_from)
        .within(&name)
        .and_then(|tr| total_deviation_on(&tr, omega, req.mu, model.primary_channel()).within(&name));
    match measured {
        Ok(sim) => {
            point.simulated = Some(sim);
            point.error_pct = Some(100.0 * (sim - pred.value) / pred.value);
        }
        Err(e) => point.failure = Some(e.to_string()),
    }
    Ok(point)
}

/// Every (η, Ω) pair, evaluated in parallel and returned in η-major order.
/// A failed point is recorded in [`SweepPoint::failure`] and the sweep continues.
pub fn sweep(req: &SweepRequest) -> Result<Vec<SweepPoint>, HarnessError> {
    let model = build_model(req.controller, req.rho, req.mu, req.b).within("sweep")?;
    let pairs: Vec<(f64, f64)> = req
        .etas
        .iter()
        .flat_map(|&eta| req.omegas.iter().map(move |&om| (eta, om)))
        .collect();
    pairs
        .par_iter()
        .map(|&(eta, omega)| run_point(req, &model, eta, omega))
        .collect()
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "eta,omega,band,horizon,predicted,simulated,error_pct,qualitative,eg_valid,a2_valid,failure"
    )?;
    for p in points {
        writeln!(
            w,
            "{:.6},{:.6},{},{:.1},{:.6},{},{},{},{},{},{}",
            p.eta,
            p.omega,
            p.band.as_str(),
            p.horizon,
            p.predicted,
            p.simulated.map(|v| format!("{v:.6}")).unwrap_or_default(),
            p.error_pct.map(|v| format!("{v:.3}")).unwrap_or_default(),
            p.qualitative,
            p.eg_valid,
            p.assumption2_valid,
            p.failure.as_deref().unwrap_or("").replace(',', ";"),
        )?;
    }
    Ok(())
}
