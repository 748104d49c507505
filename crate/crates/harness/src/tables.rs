//! The three bias batteries: constant and sinusoidal disturbances on the relay
//! loop, and a sinusoidal disturbance on the Lipschitz loop.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smc_chatter::{bias_sinusoidal, build_model_with_gain, Channel, ControllerKind, Scenario};

use crate::config::{ExperimentSpec, PredictionKind};
use crate::error::{Context, HarnessError};
use crate::experiment::run_experiment;
use crate::report::ComparisonReport;

pub const RHO: f64 = 5.0;
pub const MU: f64 = 0.05;
pub const SURFACE_SLOPE: f64 = 1.0;
pub const SLOW_OMEGA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableId {
    I,
    II,
    III,
}

impl TableId {
    pub const ALL: [TableId; 3] = [TableId::I, TableId::II, TableId::III];

    pub fn etas(self) -> [f64; 3] {
        match self {
            TableId::I | TableId::II => [1.0, 2.0, 3.0],
            TableId::III => [1.0 / 3.0, 2.0 / 3.0, 1.0],
        }
    }

    pub fn specs(self) -> Vec<ExperimentSpec> {
        self.etas()
            .iter()
            .map(|&eta| {
                let (scenario, kind) = match self {
                    TableId::I => (
                        Scenario::relay(RHO, MU).with_disturbance(eta, 0.0),
                        PredictionKind::BiasConstant,
                    ),
                    TableId::II => (
                        Scenario::relay(RHO, MU).with_disturbance(eta, SLOW_OMEGA),
                        PredictionKind::BiasSinusoidal,
                    ),
                    TableId::III => (
                        Scenario::lipschitz(RHO, MU, SURFACE_SLOPE).with_disturbance(eta, SLOW_OMEGA),
                        PredictionKind::BiasSinusoidal,
                    ),
                };
                ExperimentSpec::new(format!("table-{self}-eta-{eta:.4}"), scenario).predict([kind])
            })
            .collect()
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableId::I => "I",
            TableId::II => "II",
            TableId::III => "III",
        })
    }
}

impl FromStr for TableId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(TableId::I),
            "II" | "2" => Ok(TableId::II),
            "III" | "3" => Ok(TableId::III),
            other => Err(format!("unknown table `{other}`, expected I, II or III")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub eta: f64,
    pub channel: Channel,
    pub predicted: f64,
    pub simulated: f64,
    /// Relative to the predicted value, the convention of the reference tables.
    pub error_pct: f64,
    pub error_pct_vs_simulated: f64,
    pub predicted_phase_deg: Option<f64>,
    pub simulated_phase_deg: Option<f64>,
    /// Prediction with the alternative Lipschitz gain `sqrt(1-2bμ)/μ`.
    pub predicted_alt_gain: Option<f64>,
    pub error_pct_alt_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub id: TableId,
    pub rows: Vec<TableRow>,
    pub reports: Vec<ComparisonReport>,
}

fn row(report: &ComparisonReport, eta: f64, channel: Channel, label: &str, alt: Option<f64>) -> Option<TableRow> {
    let (mag, phase) = match report.get(label) {
        Some(c) => (c, None),
        None => (
            report.get(&format!("{label}_magnitude"))?,
            report.get(&format!("{label}_phase_deg")),
        ),
    };
    let err = |p: f64| 100.0 * (p - mag.simulated).abs() / p.abs();
    Some(TableRow {
        eta,
        channel,
        predicted: mag.predicted,
        simulated: mag.simulated,
        error_pct: err(mag.predicted),
        error_pct_vs_simulated: 100.0 * (mag.predicted - mag.simulated).abs() / mag.simulated.abs(),
        predicted_phase_deg: phase.map(|c| c.predicted),
        simulated_phase_deg: phase.map(|c| c.simulated),
        predicted_alt_gain: alt,
        error_pct_alt_gain: alt.map(err),
    })
}

/// Runs the battery (in parallel) and assembles the table in η order.
pub fn reproduce_table(id: TableId) -> Result<TableReport, HarnessError> {
    let reports = id
        .specs()
        .par_iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>, _>>()?;

    let alt_model = match id {
        TableId::III => {
            let kn = (1.0 - 2.0 * SURFACE_SLOPE * MU).sqrt() / MU;
            Some(
                build_model_with_gain(ControllerKind::LipschitzContinuous, RHO, MU, SURFACE_SLOPE, kn)
                    .within("table-III-alt-gain")?,
            )
        }
        _ => None,
    };

    let mut rows = Vec::new();
    for (report, eta) in reports.iter().zip(id.etas()) {
        let alt = match &alt_model {
            Some(m) => Some(bias_sinusoidal(m, eta, SLOW_OMEGA).within(&report.name)?),
            None => None,
        };
        let channels: &[(Channel, &str)] = match id {
            TableId::III => &[(Channel::Sliding, "sliding_bias"), (Channel::Tracking, "bias")],
            _ => &[(Channel::Tracking, "bias")],
        };
        for &(ch, label) in channels {
            let alt_mag = alt.map(|a| match ch {
                Channel::Sliding => a.sliding.map_or(f64::NAN, |p| p.magnitude),
                Channel::Tracking => a.tracking.magnitude,
            });
            let r = row(report, eta, ch, label, alt_mag)
                .ok_or_else(|| HarnessError::invalid(&report.name, format!("report lacks a `{label}` comparison")))?;
            rows.push(r);
        }
    }
    Ok(TableReport { id, rows, reports })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_default()
}

impl TableReport {
    /// Fixed-precision CSV; identical runs give identical bytes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "table,eta,channel,predicted,simulated,error_pct,error_pct_vs_simulated,\
             predicted_phase_deg,simulated_phase_deg,predicted_alt_gain,error_pct_alt_gain"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:.6},{},{:.6},{:.6},{:.4},{:.4},{},{},{},{}",
                self.id,
                r.eta,
                match r.channel {
                    Channel::Tracking => "sigma",
                    Channel::Sliding => "S",
                },
                r.predicted,
                r.simulated,
                r.error_pct,
                r.error_pct_vs_simulated,
                opt(r.predicted_phase_deg, 4),
                opt(r.simulated_phase_deg, 4),
                opt(r.predicted_alt_gain, 6),
                opt(r.error_pct_alt_gain, 4),
            )?;
        }
        Ok(())
    }

    pub fn rows_on(&self, channel: Channel) -> impl Iterator<Item = &TableRow> {
        self.rows.iter().filter(move |r| r.channel == channel)
    }
}
