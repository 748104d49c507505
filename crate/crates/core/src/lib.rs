//! Chattering analysis for sliding-mode loops with a fast actuator.
//!
//! The crate simulates the relay and Lipschitz-continuous controllers driving
//! `σ̇ = f − u` through a critically damped actuator, measures the resulting
//! limit cycle, and predicts it with describing functions: harmonic balance for
//! the fast chattering and an equivalent-gain loop for the slow bias.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the bottom of this file fix the scalar to `f64`, which is what the
//! command-line harness uses.

// `!(x > 0)` is used on purpose so that NaN is rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod describing_fn;
pub mod harmonic_balance;
pub mod lti;
pub mod plant_sim;
pub mod scalar;
pub mod sensitivity;
pub mod trace_analysis;

pub use describing_fn::{DfError, DfQuery, RelayDf, SlowInput, SMALL_BIAS_RATIO};
pub use harmonic_balance::{
    chattering_lipschitz, chattering_relay, hb_residual, lipschitz_linear_block, loeb_stable, relay_linear_block,
    solve_hb, solve_hb_on, HbCandidate, HbError, LimitCyclePrediction, SearchGrid,
};
pub use lti::{LtiError, RationalTransferFunction};
pub use plant_sim::{
    disturbance, simulate, simulate_recording_from, simulate_with, Channel, ClosedLoop, ControllerKind, Sample,
    SimError, SimScenario, SimTrace, TraceView,
};
pub use scalar::{logspace, sign, wrap_degrees, Scalar};
pub use sensitivity::{
    bias_constant, bias_sinusoidal, bode_sweep, bode_sweep_channel, build_model, build_model_with_gain,
    default_bode_grid, total_deviation_prediction, unwrap_phase, validity_max_frequency, Band, BodePoint, ConstantBias,
    Phasor, SensitivityError, SensitivityModel, SinusoidalBias, TotalDeviationPrediction, ValidityLimit,
};
pub use trace_analysis::{
    cycle_average, extract_features, fit_slow_component, total_deviation, total_deviation_on, total_deviation_window,
    AnalysisError, CycleSample, SlowFit, SteadyStateFeatures, DEFAULT_SETTLE_FRACTION,
};

/// Version of this crate, embedded in reproducibility metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type TransferFunction = RationalTransferFunction<f64>;
pub type Scenario = SimScenario<f64>;
pub type Trace = SimTrace<f64>;
pub type Features = SteadyStateFeatures<f64>;
pub type Prediction = LimitCyclePrediction<f64>;
pub type Model = SensitivityModel<f64>;
pub type Bode = BodePoint<f64>;
pub type Df = RelayDf<f64>;
