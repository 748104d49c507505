//! Acceptance criteria for the toolkit, each returning a pass/fail line with
//! the numbers behind it.
//!
//! Reference values are the recorded measurements for the `ρ = 5`, `μ = 0.05`
//! loop. Tolerances sit next to the criterion that uses them.

use std::fmt;

use smc_chatter::{
    chattering_lipschitz, chattering_relay, extract_features, hb_residual, lipschitz_linear_block, logspace,
    relay_linear_block, simulate, solve_hb, solve_hb_on, validity_max_frequency, Band, Channel, ControllerKind,
    DfQuery, HbError, RelayDf, Scenario, SearchGrid, SlowInput, ValidityLimit, DEFAULT_SETTLE_FRACTION,
};

use crate::sweep::{sweep, SweepRequest};
use crate::tables::{reproduce_table, TableId, MU, RHO};

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2}: {} | {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail
        )
    }
}

/// Accumulates sub-checks; the criterion passes only if all of them do.
struct Checks {
    ok: bool,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            ok: true,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, note: impl Into<String>) {
        let note = note.into();
        self.notes.push(if ok { note } else { format!("MISS {note}") });
        self.ok &= ok;
    }

    fn fail(&mut self, note: impl fmt::Display) {
        self.check(false, note.to_string());
    }

    fn finish(self, id: u8, title: &'static str) -> CriterionResult {
        CriterionResult {
            id,
            title,
            passed: self.ok,
            detail: self.notes.join("; "),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Truncation to four decimals, the way the reference amplitudes are printed.
fn truncated4(x: f64) -> f64 {
    (x * 1e4 + 1e-9).trunc() / 1e4
}

pub fn criterion_1() -> CriterionResult {
    let mut c = Checks::new();
    match chattering_relay(RHO, MU) {
        Ok(p) => {
            c.check(rel(p.omega_star, 20.0) < 1e-12, format!("omega*={:.6}", p.omega_star));
            c.check(
                truncated4(p.amplitude_star) == 0.1591,
                format!("A*={:.6}", p.amplitude_star),
            );
        }
        Err(e) => c.fail(e),
    }
    c.finish(1, "closed-form relay chattering")
}

pub fn criterion_2() -> CriterionResult {
    const REL: f64 = 1e-8;
    let mut c = Checks::new();
    let w = relay_linear_block(MU);
    match (solve_hb(&w, RHO), chattering_relay(RHO, MU)) {
        (Ok(n), Ok(cf)) => {
            let (dw, da) = (
                rel(n.omega_star, cf.omega_star),
                rel(n.amplitude_star, cf.amplitude_star),
            );
            c.check(dw < REL, format!("omega rel diff {dw:.2e}"));
            c.check(da < REL, format!("A rel diff {da:.2e}"));
            let r = hb_residual(&w, RHO, &n);
            c.check(r < 1e-8, format!("residual {r:.2e}"));
        }
        (Err(e), _) | (_, Err(e)) => c.fail(e),
    }
    c.finish(2, "numeric harmonic balance equals closed form")
}

pub fn criterion_3() -> CriterionResult {
    let mut c = Checks::new();
    let run = simulate(&Scenario::relay(RHO, MU))
        .map_err(|e| e.to_string())
        .and_then(|tr| extract_features(&tr, DEFAULT_SETTLE_FRACTION).map_err(|e| e.to_string()));
    match run {
        Ok(f) => {
            c.check(
                rel(f.frequency, 19.513) <= 0.015,
                format!("omega={:.4} (ref 19.513)", f.frequency),
            );
            c.check(
                rel(f.amplitude, 0.1655) <= 0.03,
                format!("A={:.5} (ref 0.1655)", f.amplitude),
            );
        }
        Err(e) => c.fail(e),
    }
    c.finish(3, "simulated relay chattering")
}

pub fn criterion_4() -> CriterionResult {
    const SIM: [f64; 3] = [0.0448, 0.0854, 0.1146];
    const PRED: [f64; 3] = [0.05, 0.10, 0.15];
    const ERR: [f64; 3] = [10.40, 14.60, 23.60];
    let mut c = Checks::new();
    match reproduce_table(TableId::I) {
        Ok(t) => {
            for (i, r) in t.rows.iter().enumerate() {
                c.check(
                    rel(r.predicted, PRED[i]) < 1e-12,
                    format!("eta={} pred {:.4}", r.eta, r.predicted),
                );
                c.check(
                    rel(r.simulated, SIM[i]) <= 0.05,
                    format!("sim {:.4} (ref {})", r.simulated, SIM[i]),
                );
                c.check(
                    (r.error_pct - ERR[i]).abs() <= 1.5,
                    format!("err {:.2}% (ref {})", r.error_pct, ERR[i]),
                );
            }
        }
        Err(e) => c.fail(e),
    }
    c.finish(4, "constant-disturbance bias table")
}

pub fn criterion_5() -> CriterionResult {
    const PRED: [f64; 3] = [0.0513, 0.1026, 0.1538];
    const SIM: [f64; 3] = [0.0454, 0.0892, 0.1292];
    const PHASE: f64 = 5.654;
    let mut c = Checks::new();
    match reproduce_table(TableId::II) {
        Ok(t) => {
            for (i, r) in t.rows.iter().enumerate() {
                let ph = r.predicted_phase_deg.unwrap_or(f64::NAN);
                c.check(
                    rel(r.predicted, PRED[i]) <= 0.005 && (ph - PHASE).abs() <= 0.1,
                    format!("eta={} pred {:.4}@{:.3}deg", r.eta, r.predicted, ph),
                );
                c.check(
                    rel(r.simulated, SIM[i]) <= 0.06,
                    format!("sim {:.4} (ref {})", r.simulated, SIM[i]),
                );
            }
        }
        Err(e) => c.fail(e),
    }
    c.finish(5, "sinusoidal-disturbance bias table")
}

pub fn criterion_6() -> CriterionResult {
    let mut c = Checks::new();
    match chattering_lipschitz(RHO, MU, 1.0) {
        Ok(p) => {
            c.check(
                (p.omega_star - 18.974).abs() < 5e-4,
                format!("omega*={:.4}", p.omega_star),
            );
            c.check(
                (p.amplitude_star - 0.1768).abs() < 5e-5,
                format!("A*={:.5}", p.amplitude_star),
            );
            c.check(
                (p.tracking_amplitude_star - 0.0093).abs() < 5e-5,
                format!("a*={:.5}", p.tracking_amplitude_star),
            );
        }
        Err(e) => c.fail(e),
    }
    let sc = Scenario::lipschitz(RHO, MU, 1.0).with_disturbance(1.0, 0.0);
    let run = simulate(&sc)
        .map_err(|e| e.to_string())
        .and_then(|tr| extract_features(&tr, DEFAULT_SETTLE_FRACTION).map_err(|e| e.to_string()));
    match run {
        Ok(f) => {
            c.check(
                rel(f.frequency, 18.479) <= 0.03,
                format!("sim omega={:.4}", f.frequency),
            );
            c.check(rel(f.amplitude, 0.1841) <= 0.03, format!("sim A={:.5}", f.amplitude));
            c.check(
                rel(f.tracking_amplitude, 0.0101) <= 0.03,
                format!("sim a={:.5}", f.tracking_amplitude),
            );
        }
        Err(e) => c.fail(e),
    }
    c.finish(6, "Lipschitz chattering closed forms and simulation")
}

pub fn criterion_7() -> CriterionResult {
    const S0_PRED: [f64; 3] = [0.0397, 0.0794, 0.1191];
    const S0_SIM: [f64; 3] = [0.0349, 0.0696, 0.1029];
    const SIG_PRED: [f64; 3] = [0.0178, 0.0355, 0.0533];
    const SIG_SIM: [f64; 3] = [0.0154, 0.0302, 0.0443];
    let mut c = Checks::new();
    match reproduce_table(TableId::III) {
        Ok(t) => {
            let channels = [
                (Channel::Sliding, "S0", S0_PRED, S0_SIM, 96.6),
                (Channel::Tracking, "sigma0", SIG_PRED, SIG_SIM, 33.17),
            ];
            for (ch, label, pred, sim, phase) in channels {
                for (i, r) in t.rows_on(ch).enumerate() {
                    let ph = r.predicted_phase_deg.unwrap_or(f64::NAN);
                    c.check(
                        rel(r.predicted, pred[i]) <= 0.01 && (ph - phase).abs() <= 0.5,
                        format!("{label} eta={:.3} pred {:.4}@{:.2}deg", r.eta, r.predicted, ph),
                    );
                    c.check(
                        rel(r.simulated, sim[i]) <= 0.06,
                        format!("{label} sim {:.4} (ref {})", r.simulated, sim[i]),
                    );
                }
            }
        }
        Err(e) => c.fail(e),
    }
    c.finish(7, "Lipschitz sinusoidal bias table")
}

pub fn criterion_8() -> CriterionResult {
    let mut c = Checks::new();
    let mut cells = 0;
    let mut relay_worst: f64 = 0.0;
    for i in 1..=10 {
        let mu = 0.01 * i as f64;
        let grid = SearchGrid::for_time_constant(mu);
        match solve_hb_on(&relay_linear_block(mu), RHO, &grid) {
            Ok(p) => {
                relay_worst = relay_worst.max((p.loeb_margin + 2.0).abs());
                if !p.loeb_stable {
                    c.fail(format!("relay mu={mu} judged unstable"));
                }
            }
            Err(e) => c.fail(format!("relay mu={mu}: {e}")),
        }
        for b in 0..=15 {
            let b = b as f64;
            let expected = 1.0 - 2.0 * b * mu > 0.0;
            let got = match solve_hb_on(&lipschitz_linear_block(mu, b), RHO, &grid) {
                Ok(p) => p.loeb_stable,
                Err(HbError::NoCrossing { .. }) => false,
                Err(e) => {
                    c.fail(format!("lipschitz mu={mu} b={b}: {e}"));
                    continue;
                }
            };
            cells += 1;
            if got != expected {
                c.fail(format!("mu={mu} b={b}: numeric {got}, analytic {expected}"));
            }
        }
    }
    c.check(
        relay_worst < 1e-3,
        format!("relay margin within {relay_worst:.1e} of -2"),
    );
    c.check(cells == 160, format!("{cells}/160 Lipschitz cells checked"));
    c.finish(8, "Loeb verdicts match the analytic signs")
}

pub fn criterion_9() -> CriterionResult {
    let mut c = Checks::new();
    match smc_chatter::build_model(ControllerKind::Relay, RHO, MU, 0.0) {
        Ok(m) => {
            for (eta, target) in [(1.0, 10.36), (2.0, 3.05)] {
                match validity_max_frequency(&m, eta) {
                    Ok(ValidityLimit::MaxFrequency(w)) => {
                        c.check(rel(w, target) <= 0.01, format!("eta={eta}: {w:.3} (ref {target})"))
                    }
                    other => c.fail(format!("eta={eta}: {other:?}")),
                }
            }
            let v = validity_max_frequency(&m, 3.0);
            c.check(
                matches!(v, Ok(ValidityLimit::EntireBandInvalid)),
                format!("eta=3: {v:?}"),
            );
        }
        Err(e) => c.fail(e),
    }
    c.finish(9, "equivalent-gain validity thresholds")
}

pub fn criterion_10() -> CriterionResult {
    let mut c = Checks::new();
    let df = RelayDf::new(RHO);
    let a = 2.0 * RHO * MU / std::f64::consts::PI;
    let mut worst: f64 = 0.0;
    for x in [0.0, 0.1, 0.2, 0.3, 0.5, 0.7] {
        let bias = x * a;
        let q = DfQuery::new(a, bias);
        match (
            df.didf_numeric_with(a, bias, SlowInput::Constant),
            df.bias_gain(&q),
            df.sidf(&q),
        ) {
            (Ok((n0, n1)), Ok(n0x), Ok(n1x)) => worst = worst.max(rel(n0, n0x)).max(rel(n1, n1x)),
            (r, s, t) => c.fail(format!("x={x}: {r:?} {s:?} {t:?}")),
        }
    }
    c.check(
        worst <= 0.005,
        format!("quadrature vs closed forms max rel diff {:.2e}", worst),
    );

    let h = 1e-7 * a;
    let slope = match (df.avg_control(a, h), df.avg_control(a, -h)) {
        (Ok(p), Ok(m)) => (p - m) / (2.0 * h),
        _ => f64::NAN,
    };
    let kn = df.equivalent_gain(a);
    c.check(rel(slope, kn) < 1e-9, format!("slope {slope:.9} vs Kn {kn:.9}"));

    let mut linear_worst: f64 = 0.0;
    for k in 1..400 {
        let x = (2.0 / 3.0) * k as f64 / 400.0;
        if let Ok(u) = df.avg_control(a, x * a) {
            linear_worst = linear_worst.max((u - kn * x * a).abs() / u.abs());
        }
    }
    c.check(
        linear_worst < 0.10,
        format!("linearity error below 2/3 ratio peaks at {:.2}%", 100.0 * linear_worst),
    );
    c.finish(10, "describing-function oracle suite")
}

pub fn criterion_11() -> CriterionResult {
    let mut c = Checks::new();
    let mut omegas = logspace(0.01, 1.0, 5);
    // generated for completeness, exempt from pass/fail
    omegas.extend([5.0, 50.0]);
    let req = SweepRequest::relay(RHO, MU, vec![1.0, 2.0, 3.0], omegas);
    match sweep(&req) {
        Ok(points) => {
            for eta in [1.0, 2.0, 3.0] {
                let low: Vec<_> = points
                    .iter()
                    .filter(|p| p.eta == eta && p.band == Band::LowFrequency)
                    .collect();
                let errs: Vec<f64> = low.iter().filter_map(|p| p.error_pct).collect();
                let worst = errs.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
                let complete = errs.len() == 5 && low.len() == 5;
                c.check(
                    complete && worst <= 15.0,
                    format!("eta={eta}: worst low-band error {worst:.1}% over {} points", errs.len()),
                );
            }
            let exempt = points.iter().filter(|p| p.qualitative).count();
            c.check(
                exempt == 6,
                format!("{exempt} high/cutoff points reported without verdict"),
            );
        }
        Err(e) => c.fail(e),
    }
    c.finish(11, "low-frequency total deviation")
}

/// All criteria in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
    ]
}
