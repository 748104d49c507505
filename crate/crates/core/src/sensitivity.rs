//! Equivalent-gain linearization of the slow motions.
//!
//! Over one chattering period the relay acts on the bias like the gain
//! `Kn = 2ρ/(πA*)`. Closing the loop with that gain gives sensitivity transfer
//! functions from a slow disturbance `f0` to the bias of the tracking error
//! (and, for the Lipschitz law, of the sliding variable):
//!
//! * relay: `σ0/f0 = G / (1 + Kn·Ga·G)`
//! * Lipschitz: `σ0/f0 = G / (1 + (Kn/s)·Ga·G·Gs)`, `S0/f0 = G·Gs / (1 + (Kn/s)·Ga·G·Gs)`
//!
//! The linear model is only trusted while `|σ0*| < (2/3)·A*` and `Ω < 0.1·ω*`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::describing_fn::{RelayDf, SMALL_BIAS_RATIO};
use crate::harmonic_balance::{chattering_lipschitz, chattering_relay, HbError};
use crate::lti::{LtiError, RationalTransferFunction};
use crate::plant_sim::{Channel, ControllerKind};
use crate::scalar::{logspace, wrap_degrees, Scalar};

/// Low/high band boundary as a fraction of the chattering frequency.
pub const LOW_BAND_FRACTION: f64 = 0.1;

const BISECTION_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SensitivityError {
    #[error(transparent)]
    Chattering(#[from] HbError),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error("disturbance frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    LowFrequency,
    HighFrequency,
    Cutoff,
}

impl Band {
    pub fn classify<T: Scalar>(omega: T, omega_star: T) -> Self {
        if omega < T::lit(LOW_BAND_FRACTION) * omega_star {
            Band::LowFrequency
        } else if omega < omega_star {
            Band::HighFrequency
        } else {
            Band::Cutoff
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Band::LowFrequency => "low",
            Band::HighFrequency => "high",
            Band::Cutoff => "cutoff",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityModel<T> {
    pub kind: ControllerKind,
    pub rho: T,
    pub mu: T,
    pub b: T,
    pub plant: RationalTransferFunction<T>,
    pub actuator: RationalTransferFunction<T>,
    pub sensor: RationalTransferFunction<T>,
    pub kn: T,
    pub amplitude_star: T,
    pub tracking_amplitude_star: T,
    pub omega_star: T,
    tracking: RationalTransferFunction<T>,
    sliding: RationalTransferFunction<T>,
}

impl<T: Scalar> SensitivityModel<T> {
    /// Closed-loop transfer from `f0` to the bias on `channel`.
    pub fn transfer(&self, channel: Channel) -> &RationalTransferFunction<T> {
        match channel {
            Channel::Tracking => &self.tracking,
            Channel::Sliding => &self.sliding,
        }
    }

    /// The channel whose fast amplitude is `A*`: the sliding variable.
    pub fn primary_channel(&self) -> Channel {
        Channel::Sliding
    }

    /// Fast-motion amplitude riding on `channel`.
    pub fn fast_amplitude(&self, channel: Channel) -> T {
        match channel {
            Channel::Sliding => self.amplitude_star,
            Channel::Tracking => self.tracking_amplitude_star,
        }
    }

    /// `(2/3)·A*`, the largest bias for which the equivalent gain is trusted.
    pub fn eg_threshold(&self) -> T {
        T::lit(SMALL_BIAS_RATIO) * self.amplitude_star
    }

    pub fn band(&self, omega: T) -> Band {
        Band::classify(omega, self.omega_star)
    }

    /// `η·H(jΩ)` on `channel`.
    pub fn response(&self, channel: Channel, eta: T, omega: T) -> Result<Complex<T>, LtiError> {
        Ok(self.transfer(channel).evaluate(omega)? * eta)
    }
}

/// Builds the linearized slow-motion loop, taking A* and ω* from the closed-form
/// chattering predictions and `Kn = 2ρ/(πA*)`.
pub fn build_model<T: Scalar>(
    kind: ControllerKind,
    rho: T,
    mu: T,
    b: T,
) -> Result<SensitivityModel<T>, SensitivityError> {
    build_model_inner(kind, rho, mu, b, None)
}

/// Same loop as [`build_model`] but closed with a caller-supplied equivalent gain.
/// Useful for auditing how sensitive the bias prediction is to the choice of `Kn`.
pub fn build_model_with_gain<T: Scalar>(
    kind: ControllerKind,
    rho: T,
    mu: T,
    b: T,
    kn: T,
) -> Result<SensitivityModel<T>, SensitivityError> {
    build_model_inner(kind, rho, mu, b, Some(kn))
}

fn build_model_inner<T: Scalar>(
    kind: ControllerKind,
    rho: T,
    mu: T,
    b: T,
    kn_override: Option<T>,
) -> Result<SensitivityModel<T>, SensitivityError> {
    type Tf<T> = RationalTransferFunction<T>;
    let plant = Tf::integrator();
    let actuator = Tf::critically_damped(mu);
    let (fast, sensor) = match kind {
        ControllerKind::Relay => (chattering_relay(rho, mu)?, Tf::identity()),
        ControllerKind::LipschitzContinuous => (chattering_lipschitz(rho, mu, b)?, Tf::lead(b)),
    };
    let kn = kn_override.unwrap_or_else(|| RelayDf::new(rho).equivalent_gain(fast.amplitude_star));
    let w = actuator.series(&plant).series(&sensor);
    let (tracking, sliding) = match kind {
        ControllerKind::Relay => {
            let t = plant.feedback(&w, kn);
            (t.clone(), t)
        }
        ControllerKind::LipschitzContinuous => {
            // the equivalent gain acts through the controller integrator
            let loop_tf = Tf::integrator().series(&w);
            (
                plant.feedback(&loop_tf, kn),
                plant.series(&sensor).feedback(&loop_tf, kn),
            )
        }
    };
    Ok(SensitivityModel {
        kind,
        rho,
        mu,
        b: if kind == ControllerKind::Relay { T::zero() } else { b },
        plant,
        actuator,
        sensor,
        kn,
        amplitude_star: fast.amplitude_star,
        tracking_amplitude_star: fast.tracking_amplitude_star,
        omega_star: fast.omega_star,
        tracking,
        sliding,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantBias<T> {
    pub tracking: T,
    /// Present for the Lipschitz law only.
    pub sliding: Option<T>,
    /// `|bias| < (2/3)A*` on the primary channel.
    pub eg_valid: bool,
    /// `|η| / (A*·Kn)`; the linearization assumes this is small.
    pub disturbance_ratio: T,
}

/// Steady-state bias under `f = η`, the final value `lim s→0 η·H(s)`.
pub fn bias_constant<T: Scalar>(model: &SensitivityModel<T>, eta: T) -> Result<ConstantBias<T>, SensitivityError> {
    let tracking = eta * model.transfer(Channel::Tracking).dc_limit()?;
    let sliding = eta * model.transfer(Channel::Sliding).dc_limit()?;
    Ok(ConstantBias {
        tracking,
        sliding: (model.kind == ControllerKind::LipschitzContinuous).then_some(sliding),
        eg_valid: sliding.abs() < model.eg_threshold(),
        disturbance_ratio: eta.abs() / (model.amplitude_star * model.kn),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phasor<T> {
    pub magnitude: T,
    /// Degrees in `(-180, 180]`; the bias is `magnitude·cos(Ωt + phase)`.
    pub phase_deg: T,
}

impl<T: Scalar> Phasor<T> {
    pub fn from_complex(z: Complex<T>) -> Self {
        Self {
            magnitude: z.norm(),
            phase_deg: wrap_degrees(z.arg().to_degrees()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidalBias<T> {
    pub tracking: Phasor<T>,
    pub sliding: Option<Phasor<T>>,
}

/// Bias under `f = η·cos(Ωt)`: the sensitivities evaluated at `jΩ`, scaled by η.
pub fn bias_sinusoidal<T: Scalar>(
    model: &SensitivityModel<T>,
    eta: T,
    omega: T,
) -> Result<SinusoidalBias<T>, SensitivityError> {
    if !(omega > T::zero()) {
        return Err(SensitivityError::NonPositiveFrequency(omega.as_f64()));
    }
    let tracking = Phasor::from_complex(model.response(Channel::Tracking, eta, omega)?);
    let sliding = match model.kind {
        ControllerKind::Relay => None,
        ControllerKind::LipschitzContinuous => {
            Some(Phasor::from_complex(model.response(Channel::Sliding, eta, omega)?))
        }
    };
    Ok(SinusoidalBias { tracking, sliding })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodePoint<T> {
    pub omega: T,
    pub mag_abs: T,
    pub mag_db: T,
    pub phase_deg: T,
    pub band: Band,
    /// `|σ0*| < (2/3)A*`
    pub eg_valid: bool,
    /// `Ω < 0.1·ω*`
    pub assumption2_valid: bool,
    /// `|σ0*| + A*`
    pub total_dev: T,
}

/// 400 log-spaced points over `[0.01, 100]` rad/s.
pub fn default_bode_grid<T: Scalar>() -> Vec<T> {
    logspace(T::lit(0.01), T::lit(100.0), 400)
}

/// Bode data of the primary channel scaled by η.
pub fn bode_sweep<T: Scalar>(
    model: &SensitivityModel<T>,
    eta: T,
    grid: &[T],
) -> Result<Vec<BodePoint<T>>, SensitivityError> {
    bode_sweep_channel(model, eta, grid, model.primary_channel())
}

pub fn bode_sweep_channel<T: Scalar>(
    model: &SensitivityModel<T>,
    eta: T,
    grid: &[T],
    channel: Channel,
) -> Result<Vec<BodePoint<T>>, SensitivityError> {
    let fast = model.fast_amplitude(channel);
    grid.iter()
        .map(|&omega| {
            if !(omega > T::zero()) {
                return Err(SensitivityError::NonPositiveFrequency(omega.as_f64()));
            }
            let p = Phasor::from_complex(model.response(channel, eta, omega)?);
            let band = model.band(omega);
            Ok(BodePoint {
                omega,
                mag_abs: p.magnitude,
                mag_db: T::lit(20.0) * p.magnitude.log10(),
                phase_deg: p.phase_deg,
                band,
                eg_valid: p.magnitude < model.eg_threshold(),
                assumption2_valid: band == Band::LowFrequency,
                total_dev: p.magnitude + fast,
            })
        })
        .collect()
}

/// Phase of a sweep with 360° jumps removed, for plotting.
pub fn unwrap_phase<T: Scalar>(points: &[BodePoint<T>]) -> Vec<T> {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let mut out: Vec<T> = Vec::with_capacity(points.len());
    let mut offset = T::zero();
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            let d = p.phase_deg - points[i - 1].phase_deg;
            if d > half {
                offset -= full;
            } else if d < -half {
                offset += full;
            }
        }
        out.push(p.phase_deg + offset);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ValidityLimit<T> {
    /// The bias reaches `(2/3)A*` at this frequency.
    MaxFrequency(T),
    /// Valid over the whole grid below ω*.
    NoCrossing,
    /// Already violated at the lowest grid frequency.
    EntireBandInvalid,
}

/// Smallest frequency at which the primary-channel bias reaches `(2/3)A*`,
/// located on the default grid and refined by bisection.
pub fn validity_max_frequency<T: Scalar>(
    model: &SensitivityModel<T>,
    eta: T,
) -> Result<ValidityLimit<T>, SensitivityError> {
    let ch = model.primary_channel();
    let thr = model.eg_threshold();
    let excess = |om: T| -> Result<T, SensitivityError> { Ok(model.response(ch, eta, om)?.norm() - thr) };
    let grid: Vec<T> = default_bode_grid::<T>()
        .into_iter()
        .filter(|&om| om < model.omega_star)
        .collect();
    let mut prev: Option<T> = None;
    for om in grid {
        if excess(om)? >= T::zero() {
            let Some(mut lo) = prev else {
                return Ok(ValidityLimit::EntireBandInvalid);
            };
            let mut hi = om;
            while hi - lo > T::lit(BISECTION_RTOL) * hi {
                let mid = (lo + hi) / T::lit(2.0);
                if excess(mid)? >= T::zero() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(ValidityLimit::MaxFrequency((lo + hi) / T::lit(2.0)));
        }
        prev = Some(om);
    }
    Ok(ValidityLimit::NoCrossing)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalDeviationPrediction<T> {
    pub value: T,
    pub band: Band,
    /// True outside the low-frequency band, where the estimate is only indicative.
    pub qualitative: bool,
}

/// `|σ0*(Ω)| + A*` on the primary channel; `Ω = 0` uses the constant-bias limit.
pub fn total_deviation_prediction<T: Scalar>(
    model: &SensitivityModel<T>,
    eta: T,
    omega: T,
) -> Result<TotalDeviationPrediction<T>, SensitivityError> {
    let ch = model.primary_channel();
    let slow = if omega > T::zero() {
        model.response(ch, eta, omega)?.norm()
    } else {
        (eta * model.transfer(ch).dc_limit()?).abs()
    };
    let band = model.band(omega);
    Ok(TotalDeviationPrediction {
        value: slow + model.fast_amplitude(ch),
        band,
        qualitative: band != Band::LowFrequency,
    })
}
