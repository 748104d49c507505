use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use smc_chatter::{
    bias_constant, bias_sinusoidal, bode_sweep_channel, build_model, chattering_lipschitz, chattering_relay, logspace,
    total_deviation_prediction, validity_max_frequency, Channel, ControllerKind, Scenario,
};
use smc_harness::acceptance;
use smc_harness::{
    reproduce_table, run_experiment_detailed, sweep, write_sweep_csv, ExperimentSpec, PredictionKind, SweepRequest,
    TableId,
};

/// Chattering simulation and describing-function prediction for sliding-mode loops.
#[derive(Parser)]
#[command(name = "smc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write the trace as CSV.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Keep every n-th sample.
        #[arg(long, default_value_t = 10)]
        stride: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Closed-form and linearized predictions as JSON.
    Predict {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sensitivity Bode sweep as CSV.
    Bode {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum)]
        channel: Option<ChannelArg>,
        #[arg(long, default_value_t = 0.01)]
        omega_lo: f64,
        #[arg(long, default_value_t = 100.0)]
        omega_hi: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Reproduce the bias tables as CSV and JSON.
    Tables {
        /// I, II or III; all three when omitted.
        #[arg(long)]
        table: Option<TableId>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Total-deviation frequency sweep as CSV.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated disturbance magnitudes.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        etas: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        omega_lo: f64,
        #[arg(long, default_value_t = 100.0)]
        omega_hi: f64,
        #[arg(long, default_value_t = 25)]
        points: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run an experiment described by a TOML file and write its report.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance criteria; exit status 1 if any fails.
    Check,
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllerArg {
    Relay,
    Lipschitz,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Sigma,
    S,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, value_enum, default_value = "relay")]
    controller: ControllerArg,
    #[arg(long, default_value_t = 5.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.05)]
    mu: f64,
    /// Surface slope (Lipschitz only).
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Disturbance frequency in rad/s; 0 for a constant disturbance.
    #[arg(long, default_value_t = 0.0)]
    omega: f64,
    #[arg(long, default_value_t = 1e-4)]
    ts: f64,
    #[arg(long, default_value_t = 40.0)]
    t_final: f64,
}

impl ScenarioArgs {
    fn kind(&self) -> ControllerKind {
        match self.controller {
            ControllerArg::Relay => ControllerKind::Relay,
            ControllerArg::Lipschitz => ControllerKind::LipschitzContinuous,
        }
    }

    fn scenario(&self) -> Scenario {
        let base = match self.controller {
            ControllerArg::Relay => Scenario::relay(self.rho, self.mu),
            ControllerArg::Lipschitz => Scenario::lipschitz(self.rho, self.mu, self.b),
        };
        base.with_disturbance(self.eta, self.omega)
            .with_step(self.ts)
            .with_horizon(self.t_final)
    }
}

fn create(dir: &Path, file: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(file);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    eprintln!("writing {}", path.display());
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, file: &str, value: &T) -> Result<()> {
    let mut w = create(dir, file)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Predictions {
    scenario: Scenario,
    chattering: Option<smc_chatter::Prediction>,
    bias_constant: Option<smc_chatter::ConstantBias<f64>>,
    bias_sinusoidal: Option<smc_chatter::SinusoidalBias<f64>>,
    total_deviation: Option<smc_chatter::TotalDeviationPrediction<f64>>,
    validity_max_frequency: Option<smc_chatter::ValidityLimit<f64>>,
    equivalent_gain: Option<f64>,
}

fn predict(args: &ScenarioArgs) -> Result<Predictions> {
    let sc = args.scenario();
    let chattering = match sc.controller {
        ControllerKind::Relay => chattering_relay(sc.rho, sc.mu),
        ControllerKind::LipschitzContinuous => chattering_lipschitz(sc.rho, sc.mu, sc.b),
    }
    .ok();
    let model = build_model(sc.controller, sc.rho, sc.mu, sc.b).ok();
    let m = model.as_ref();
    Ok(Predictions {
        chattering,
        bias_constant: m.and_then(|m| bias_constant(m, sc.eta).ok()),
        bias_sinusoidal: m.and_then(|m| bias_sinusoidal(m, sc.eta, sc.omega).ok()),
        total_deviation: m.and_then(|m| total_deviation_prediction(m, sc.eta, sc.omega).ok()),
        validity_max_frequency: m.and_then(|m| validity_max_frequency(m, sc.eta).ok()),
        equivalent_gain: m.map(|m| m.kn),
        scenario: sc,
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { scenario, stride, out } => {
            let spec = ExperimentSpec::new("simulate", scenario.scenario());
            spec.validate()?;
            let trace = smc_chatter::simulate(&spec.scenario)?;
            let mut w = create(&out, "trace.csv")?;
            trace.write_csv(&mut w, stride)?;
            w.flush()?;
            match smc_chatter::extract_features(&trace, smc_chatter::DEFAULT_SETTLE_FRACTION) {
                Ok(mut f) => {
                    f.cycles.clear();
                    write_json(&out, "features.json", &f)?;
                }
                Err(e) => eprintln!("no steady-state features: {e}"),
            }
        }
        Command::Predict { scenario, out } => {
            write_json(&out, "predictions.json", &predict(&scenario)?)?;
        }
        Command::Bode {
            scenario,
            channel,
            omega_lo,
            omega_hi,
            points,
            out,
        } => {
            let model = build_model(scenario.kind(), scenario.rho, scenario.mu, scenario.b)?;
            let ch = match channel {
                Some(ChannelArg::Sigma) => Channel::Tracking,
                Some(ChannelArg::S) => Channel::Sliding,
                None => model.primary_channel(),
            };
            let eta = if scenario.eta == 0.0 { 1.0 } else { scenario.eta };
            let pts = bode_sweep_channel(&model, eta, &logspace(omega_lo, omega_hi, points), ch)?;
            let mut w = create(&out, "bode.csv")?;
            writeln!(w, "omega,mag_abs,mag_db,phase_deg,band,eg_valid,a2_valid,total_dev")?;
            for p in pts {
                writeln!(
                    w,
                    "{:.6e},{:.6e},{:.4},{:.4},{},{},{},{:.6e}",
                    p.omega,
                    p.mag_abs,
                    p.mag_db,
                    p.phase_deg,
                    p.band.as_str(),
                    p.eg_valid,
                    p.assumption2_valid,
                    p.total_dev
                )?;
            }
            w.flush()?;
        }
        Command::Tables { table, out } => {
            let ids = table.map_or(TableId::ALL.to_vec(), |t| vec![t]);
            for id in ids {
                let report = reproduce_table(id)?;
                let mut w = create(&out, &format!("table_{id}.csv"))?;
                report.write_csv(&mut w)?;
                w.flush()?;
                write_json(&out, &format!("table_{id}.json"), &report)?;
            }
        }
        Command::Sweep {
            scenario,
            etas,
            omega_lo,
            omega_hi,
            points,
            out,
        } => {
            let req = SweepRequest {
                controller: scenario.kind(),
                rho: scenario.rho,
                mu: scenario.mu,
                b: if scenario.kind() == ControllerKind::Relay {
                    0.0
                } else {
                    scenario.b
                },
                etas,
                omegas: logspace(omega_lo, omega_hi, points),
                ts: scenario.ts,
            };
            let pts = sweep(&req)?;
            let mut w = create(&out, "sweep.csv")?;
            write_sweep_csv(&pts, &mut w)?;
            w.flush()?;
        }
        Command::Run { config, out } => {
            let mut spec = ExperimentSpec::load(&config)?;
            if let Some(o) = out {
                spec.output_dir = o;
            }
            let outcome = run_experiment_detailed(&spec)?;
            let dir = spec.output_dir.clone();
            write_json(&dir, &format!("{}.report.json", spec.name), &outcome.report)?;
            if spec.predictions.contains(&PredictionKind::Bode) {
                let sc = &spec.scenario;
                let model = build_model(sc.controller, sc.rho, sc.mu, sc.b)?;
                let eta = if sc.eta == 0.0 { 1.0 } else { sc.eta };
                let pts = smc_chatter::bode_sweep(&model, eta, &smc_chatter::default_bode_grid())?;
                write_json(&dir, &format!("{}.bode.json", spec.name), &pts)?;
            }
            println!("{}: {}", spec.name, if outcome.report.passed { "PASS" } else { "FAIL" });
            if !outcome.report.passed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Check => {
            let results = acceptance::run_all();
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} of {} criteria passed", results.len() - failed, results.len());
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
