//! Harmonic balance for the relay loop and Loeb's orbital-stability test.
//!
//! With the relay replaced by its zero-bias SIDF `4ρ/(πA)`, the balance
//! `N1(A)·W(jω) + 1 = 0` splits into `Im{1/W(jω)} = 0`, which fixes ω*, and
//! `4ρ/(πA) + Re{1/W(jω*)} = 0`, which fixes A*.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::describing_fn::{DfQuery, RelayDf};
use crate::lti::RationalTransferFunction;
use crate::scalar::{logspace, Scalar};

const BISECTION_RTOL: f64 = 1e-10;
const BISECTION_MAX_ITER: usize = 200;
const LOEB_REL_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum HbError {
    #[error("Im{{1/W(jω)}} has no sign change on [{lo}, {hi}] rad/s")]
    NoCrossing { lo: f64, hi: f64 },
    #[error("no physical amplitude: Re{{1/W(jω)}} = {re} >= 0 at every crossing")]
    NonPhysicalAmplitude { re: f64 },
    #[error("orbital stability requires 1 - 2bμ > 0, got {margin}")]
    OrbitallyUnstable { margin: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Logarithmic frequency grid scanned for sign changes of `Im{1/W}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchGrid<T> {
    pub omega_lo: T,
    pub omega_hi: T,
    pub points: usize,
}

impl<T: Scalar> SearchGrid<T> {
    /// `[1e-3/μ, 1e3/μ]` with 2000 points; the relevant roots scale as `1/μ`.
    pub fn for_time_constant(mu: T) -> Self {
        Self {
            omega_lo: T::lit(1e-3) / mu,
            omega_hi: T::lit(1e3) / mu,
            points: 2000,
        }
    }
}

impl<T: Scalar> Default for SearchGrid<T> {
    fn default() -> Self {
        Self {
            omega_lo: T::lit(1e-3),
            omega_hi: T::lit(1e5),
            points: 4000,
        }
    }
}

/// One root of `Im{1/W(jω)}` and what it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HbCandidate<T> {
    pub omega: T,
    /// `Re{1/W(jω)}` at the root.
    pub re_inverse: T,
    /// `-4ρ/(π·Re)`, present only when positive.
    pub amplitude: Option<T>,
    pub loeb_margin: T,
    pub loeb_stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCyclePrediction<T> {
    pub omega_star: T,
    /// Oscillation amplitude of the sliding variable.
    pub amplitude_star: T,
    /// Oscillation amplitude of the tracking error (equals `amplitude_star` for the relay law).
    pub tracking_amplitude_star: T,
    pub loeb_stable: bool,
    /// `d/dω Im{1/W(jω)}` at ω*.
    pub loeb_margin: T,
    /// Every crossing found by the numeric solver; empty for closed forms.
    pub candidates: Vec<HbCandidate<T>>,
}

/// Solves the harmonic balance on the default search grid.
pub fn solve_hb<T: Scalar>(w: &RationalTransferFunction<T>, rho: T) -> Result<LimitCyclePrediction<T>, HbError> {
    solve_hb_on(w, rho, &SearchGrid::default())
}

/// Solves the harmonic balance, scanning `grid` for sign changes of
/// `Im{1/W(jω)}` and refining each by bisection. Among physical candidates
/// (`A* > 0`) the lowest-frequency Loeb-stable one is reported; if none is
/// stable, the lowest physical one is reported with a failing verdict.
pub fn solve_hb_on<T: Scalar>(
    w: &RationalTransferFunction<T>,
    rho: T,
    grid: &SearchGrid<T>,
) -> Result<LimitCyclePrediction<T>, HbError> {
    if !(rho > T::zero()) {
        return Err(HbError::InvalidParameter("rho must be positive"));
    }
    if !(grid.omega_lo > T::zero() && grid.omega_hi > grid.omega_lo && grid.points >= 2) {
        return Err(HbError::InvalidParameter("search grid must be positive and ascending"));
    }
    let im = |om: T| w.inverse_response(om).ok().map(|(_, i)| i);
    let omegas = logspace(grid.omega_lo, grid.omega_hi, grid.points);

    let mut roots = Vec::new();
    let mut prev: Option<(T, T)> = None;
    for &om in &omegas {
        let Some(v) = im(om).filter(|v| v.is_finite()) else {
            prev = None;
            continue;
        };
        if v.is_zero() {
            roots.push(om);
            prev = None;
            continue;
        }
        if let Some((po, pv)) = prev {
            if (pv < T::zero()) != (v < T::zero()) {
                if let Some(r) = bisect(&im, po, om) {
                    roots.push(r);
                }
            }
        }
        prev = Some((om, v));
    }
    if roots.is_empty() {
        return Err(HbError::NoCrossing {
            lo: grid.omega_lo.as_f64(),
            hi: grid.omega_hi.as_f64(),
        });
    }

    let four_rho_pi = T::lit(4.0) * rho / T::PI();
    let candidates: Vec<HbCandidate<T>> = roots
        .into_iter()
        .filter_map(|om| {
            let (re, _) = w.inverse_response(om).ok()?;
            let amplitude = (re < T::zero()).then(|| -four_rho_pi / re);
            let (loeb_stable, loeb_margin) = loeb_stable(w, om);
            Some(HbCandidate {
                omega: om,
                re_inverse: re,
                amplitude,
                loeb_margin,
                loeb_stable,
            })
        })
        .collect();

    let physical = || candidates.iter().filter(|c| c.amplitude.is_some());
    let chosen = physical()
        .find(|c| c.loeb_stable)
        .or_else(|| physical().next())
        .copied();
    let Some(best) = chosen else {
        let re = candidates.first().map_or(f64::NAN, |c| c.re_inverse.as_f64());
        return Err(HbError::NonPhysicalAmplitude { re });
    };
    let amp = best.amplitude.expect("physical candidate");
    Ok(LimitCyclePrediction {
        omega_star: best.omega,
        amplitude_star: amp,
        tracking_amplitude_star: amp,
        loeb_stable: best.loeb_stable,
        loeb_margin: best.loeb_margin,
        candidates,
    })
}

fn bisect<T: Scalar>(f: &impl Fn(T) -> Option<T>, mut lo: T, mut hi: T) -> Option<T> {
    let mut flo = f(lo)?;
    for _ in 0..BISECTION_MAX_ITER {
        let mid = (lo + hi) / T::lit(2.0);
        if (hi - lo) <= T::lit(BISECTION_RTOL) * mid.abs() {
            return Some(mid);
        }
        let fm = f(mid)?;
        if fm.is_zero() {
            return Some(mid);
        }
        if (fm < T::zero()) == (flo < T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some((lo + hi) / T::lit(2.0))
}

/// Loeb's test for the relay loop: the cycle is orbitally stable when
/// `d/dω Im{1/W(jω)} < 0` at ω*. The derivative is a central difference with
/// step `1e-6·ω*`. Returns `(stable, derivative)`.
pub fn loeb_stable<T: Scalar>(w: &RationalTransferFunction<T>, omega_star: T) -> (bool, T) {
    let h = T::lit(LOEB_REL_STEP) * omega_star;
    let im = |om: T| w.inverse_response(om).map(|(_, i)| i);
    match (im(omega_star + h), im(omega_star - h)) {
        (Ok(a), Ok(b)) => {
            let d = (a - b) / (T::lit(2.0) * h);
            (d < T::zero(), d)
        }
        _ => (false, T::nan()),
    }
}

/// `|N1(A*)·W(jω*) + 1|`, which vanishes at an exact solution.
pub fn hb_residual<T: Scalar>(w: &RationalTransferFunction<T>, rho: T, prediction: &LimitCyclePrediction<T>) -> T {
    let n1 = RelayDf::new(rho)
        .sidf(&DfQuery::new(prediction.amplitude_star, T::zero()))
        .unwrap_or_else(|_| T::nan());
    match w.evaluate(prediction.omega_star) {
        Ok(g) => (g * n1 + Complex::new(T::one(), T::zero())).norm(),
        Err(_) => T::nan(),
    }
}

/// Closed-form chattering of the relay with actuator `1/(μs+1)^2` and plant `1/s`:
/// `ω* = 1/μ`, `A* = 2ρμ/π`; always orbitally stable.
pub fn chattering_relay<T: Scalar>(rho: T, mu: T) -> Result<LimitCyclePrediction<T>, HbError> {
    if !(rho > T::zero() && mu > T::zero()) {
        return Err(HbError::InvalidParameter("rho and mu must be positive"));
    }
    let omega = T::one() / mu;
    let amp = T::lit(2.0) * rho * mu / T::PI();
    // d/dω [ω(1 - μ²ω²)] = 1 - 3μ²ω², which is -2 at ω = 1/μ
    let margin = T::one() - T::lit(3.0) * mu * mu * omega * omega;
    Ok(LimitCyclePrediction {
        omega_star: omega,
        amplitude_star: amp,
        tracking_amplitude_star: amp,
        loeb_stable: margin < T::zero(),
        loeb_margin: margin,
        candidates: Vec::new(),
    })
}

/// Closed-form chattering of the Lipschitz-continuous law with linear block
/// `(s+b)/(s²(μs+1)^2)`:
/// `ω* = sqrt(1-2bμ)/μ`, `A* = 2ρμ/(π(1-2bμ))`, `a* = 2ρμ²/(π(1-2bμ)(1-bμ))`.
pub fn chattering_lipschitz<T: Scalar>(rho: T, mu: T, b: T) -> Result<LimitCyclePrediction<T>, HbError> {
    if !(rho > T::zero() && mu > T::zero() && b >= T::zero()) {
        return Err(HbError::InvalidParameter("rho, mu must be positive and b non-negative"));
    }
    let two = T::lit(2.0);
    let k = T::one() - two * b * mu;
    if !(k > T::zero()) {
        return Err(HbError::OrbitallyUnstable { margin: k.as_f64() });
    }
    let omega = k.sqrt() / mu;
    let amp = two * rho * mu / (T::PI() * k);
    let tracking = two * rho * mu * mu / (T::PI() * k * (T::one() - b * mu));
    // Im{1/W(jω)} = -ω³(μ²ω² - (1 - 2bμ))/(b² + ω²); its slope at the root
    let w2 = omega * omega;
    let margin = -two * mu * mu * w2 * w2 / (b * b + w2);
    Ok(LimitCyclePrediction {
        omega_star: omega,
        amplitude_star: amp,
        tracking_amplitude_star: tracking,
        loeb_stable: margin < T::zero(),
        loeb_margin: margin,
        candidates: Vec::new(),
    })
}

/// `1/s · 1/(μs+1)^2`
pub fn relay_linear_block<T: Scalar>(mu: T) -> RationalTransferFunction<T> {
    RationalTransferFunction::critically_damped(mu).series(&RationalTransferFunction::integrator())
}

/// `(s+b)/(s²(μs+1)^2)`: sensor, actuator, plant and controller integrator.
pub fn lipschitz_linear_block<T: Scalar>(mu: T, b: T) -> RationalTransferFunction<T> {
    let g = RationalTransferFunction::integrator();
    RationalTransferFunction::lead(b)
        .series(&RationalTransferFunction::critically_damped(mu))
        .series(&g)
        .series(&g)
}
