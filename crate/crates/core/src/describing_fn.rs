//! Describing functions of the relay `u = ρ·sign(σ)`.
//!
//! The relay is static and single-valued, so every gain here is independent of
//! the carrier and slow frequencies; [`DfQuery`] carries them for reporting.
//! `σ0 = 0` is always routed to the analytic limit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{sign, Scalar};

/// Bias-to-amplitude ratio above which the small-bias assumption is flagged.
pub const SMALL_BIAS_RATIO: f64 = 2.0 / 3.0;

const QUAD_START: usize = 256;
const QUAD_MAX: usize = 4096;
const QUAD_RTOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DfError {
    #[error("bias {bias} outside the carrier amplitude {amplitude}")]
    Domain { bias: f64, amplitude: f64 },
    #[error("amplitude must be positive, got {0}")]
    NonPositiveAmplitude(f64),
    #[error("series order must be 1, 2 or 3, got {0}")]
    SeriesOrder(usize),
    #[error("quadrature did not converge: last relative change {change} at {points} points")]
    QuadratureNonconvergence { change: f64, points: usize },
}

/// The relay nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayDf<T> {
    pub rho: T,
}

/// Input waveform `σ0·(slow part) + A·sin(ωt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DfQuery<T> {
    pub amplitude: T,
    pub bias: T,
    pub omega: T,
    pub slow_omega: T,
}

impl<T: Scalar> DfQuery<T> {
    pub fn new(amplitude: T, bias: T) -> Self {
        Self {
            amplitude,
            bias,
            omega: T::zero(),
            slow_omega: T::zero(),
        }
    }

    pub fn ratio(&self) -> T {
        self.bias.abs() / self.amplitude
    }

    /// True when `|σ0|/A` exceeds 2/3 and the small-bias reading is doubtful.
    pub fn small_bias_violated(&self) -> bool {
        self.ratio() > T::lit(SMALL_BIAS_RATIO)
    }
}

/// Shape of the second (slow) input used by the numeric dual-input DF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlowInput {
    /// `σ0` constant: reduces to the biased-sinusoid DF.
    Constant,
    /// `σ0·sin(Ωt)` with Ω incommensurate to ω.
    Sinusoid,
}

fn check_amplitude<T: Scalar>(a: T) -> Result<(), DfError> {
    if a > T::zero() && a.is_finite() {
        Ok(())
    } else {
        Err(DfError::NonPositiveAmplitude(a.as_f64()))
    }
}

fn strict_domain<T: Scalar>(a: T, bias: T) -> Result<(), DfError> {
    check_amplitude(a)?;
    if bias.abs() < a {
        Ok(())
    } else {
        Err(DfError::Domain {
            bias: bias.as_f64(),
            amplitude: a.as_f64(),
        })
    }
}

impl<T: Scalar> RelayDf<T> {
    pub fn new(rho: T) -> Self {
        Self { rho }
    }

    fn two_rho_over_pi(&self) -> T {
        T::lit(2.0) * self.rho / T::PI()
    }

    /// Static gain for the constant component, `(2ρ/(πσ0))·asin(σ0/A)`.
    pub fn bias_gain(&self, q: &DfQuery<T>) -> Result<T, DfError> {
        strict_domain(q.amplitude, q.bias)?;
        if q.bias.is_zero() {
            return Ok(self.two_rho_over_pi() / q.amplitude);
        }
        Ok(self.two_rho_over_pi() / q.bias * (q.bias / q.amplitude).asin())
    }

    /// Average control `(2ρ/π)·asin(σ0/A)`.
    pub fn avg_control(&self, amplitude: T, bias: T) -> Result<T, DfError> {
        check_amplitude(amplitude)?;
        if bias.abs() > amplitude {
            return Err(DfError::Domain {
                bias: bias.as_f64(),
                amplitude: amplitude.as_f64(),
            });
        }
        let x = (bias / amplitude).max(-T::one()).min(T::one());
        Ok(self.two_rho_over_pi() * x.asin())
    }

    /// Sinusoidal-input DF `(4ρ/(πA))·sqrt(1 - (σ0/A)^2)`; purely real.
    pub fn sidf(&self, q: &DfQuery<T>) -> Result<T, DfError> {
        strict_domain(q.amplitude, q.bias)?;
        let x = q.bias / q.amplitude;
        Ok(T::lit(2.0) * self.two_rho_over_pi() / q.amplitude * (T::one() - x * x).sqrt())
    }

    /// Incremental-input DF `N1 + (A/2)·dN1/dA` at zero bias, which is `2ρ/(πA)`.
    pub fn iidf(&self, amplitude: T) -> T {
        self.two_rho_over_pi() / amplitude
    }

    /// Slope of the average-control function at zero bias, `2ρ/(πA)`.
    pub fn equivalent_gain(&self, amplitude: T) -> T {
        // d/dσ0 (2ρ/π) asin(σ0/A) = 2ρ / (π A sqrt(1 - (σ0/A)^2)) at σ0 = 0
        let x = T::zero();
        self.two_rho_over_pi() / (amplitude * (T::one() - x * x).sqrt())
    }

    /// Truncated power series of the dual-input DF around zero bias.
    /// Returns `(N0, N1)` using the first `n_terms` terms of each series.
    pub fn didf_series(&self, amplitude: T, bias: T, n_terms: usize) -> Result<(T, T), DfError> {
        strict_domain(amplitude, bias)?;
        if !(1..=3).contains(&n_terms) {
            return Err(DfError::SeriesOrder(n_terms));
        }
        let x2 = (bias / amplitude).powi(2);
        let n0_terms = [T::one(), x2 / T::lit(8.0), T::lit(3.0) * x2 * x2 / T::lit(64.0)];
        let n1_terms = [T::one(), -x2 / T::lit(4.0), -T::lit(3.0) * x2 * x2 / T::lit(64.0)];
        let sum = |t: &[T; 3]| t[..n_terms].iter().fold(T::zero(), |a, &b| a + b);
        let base = self.two_rho_over_pi() / amplitude;
        Ok((base * sum(&n0_terms), T::lit(2.0) * base * sum(&n1_terms)))
    }

    /// Numeric dual-input DF with a sinusoidal slow input.
    pub fn didf_numeric(&self, amplitude: T, bias: T) -> Result<(T, T), DfError> {
        self.didf_numeric_with(amplitude, bias, SlowInput::Sinusoid)
    }

    /// Numeric quadrature of the dual-input DF integrals.
    ///
    /// The relay output is integrated over one cycle of each input on a
    /// midpoint tensor grid. Cells cut by the switching surface are weighted by
    /// the fraction of the cell on each side (linearized along the fast phase),
    /// which keeps the rule second order despite the jump. The grid is doubled
    /// from 256 until both gains change by less than 1e-4 relative.
    pub fn didf_numeric_with(&self, amplitude: T, bias: T, slow: SlowInput) -> Result<(T, T), DfError> {
        check_amplitude(amplitude)?;
        if slow == SlowInput::Constant && bias.abs() >= amplitude {
            return Err(DfError::Domain {
                bias: bias.as_f64(),
                amplitude: amplitude.as_f64(),
            });
        }
        let mut n = QUAD_START;
        let mut prev = self.quadrature(amplitude, bias, slow, n);
        loop {
            n *= 2;
            let cur = self.quadrature(amplitude, bias, slow, n);
            let change = rel_change(prev.0, cur.0).max(rel_change(prev.1, cur.1));
            if change <= T::lit(QUAD_RTOL) {
                return Ok(cur);
            }
            if n >= QUAD_MAX {
                return Err(DfError::QuadratureNonconvergence {
                    change: change.as_f64(),
                    points: n,
                });
            }
            prev = cur;
        }
    }

    fn quadrature(&self, a: T, bias: T, slow: SlowInput, n: usize) -> (T, T) {
        let h = T::lit(2.0) * T::PI() / T::from_usize_lossy(n);
        let half_h = h / T::lit(2.0);
        let nodes: Vec<(T, T)> = (0..n)
            .map(|i| (T::from_usize_lossy(i) + T::lit(0.5)) * h)
            .map(|x| (x.sin(), x.cos().abs()))
            .collect();
        // Relay output averaged over a fast-phase cell around node j.
        let cell = |level: T, j: usize| -> T {
            let (s, c) = nodes[j];
            let g = level + a * s;
            let slope = a * c * half_h;
            if slope > T::zero() {
                (g / slope).max(-T::one()).min(T::one())
            } else {
                sign(g)
            }
        };
        let nf = T::from_usize_lossy(n);
        match slow {
            SlowInput::Constant => {
                // N0 = (1/(2π σ0)) ∫ u dφ,  N1 = (1/(π A)) ∫ u sinφ dφ
                let (mut s0, mut s1) = (T::zero(), T::zero());
                for (j, node) in nodes.iter().enumerate() {
                    let u = cell(bias, j);
                    s0 += u;
                    s1 += u * node.0;
                }
                let n1 = T::lit(2.0) * self.rho * s1 / (a * nf);
                let n0 = if bias.is_zero() {
                    self.iidf(a)
                } else {
                    self.rho * s0 / (bias * nf)
                };
                (n0, n1)
            }
            SlowInput::Sinusoid => {
                // N0 = (1/(2π² σ0)) ∬ u sinψ,  N1 = (1/(2π² A)) ∬ u sinφ
                let (mut s0, mut s1) = (T::zero(), T::zero());
                for &(sp, _) in &nodes {
                    let level = bias * sp;
                    let (mut row, mut row_fast) = (T::zero(), T::zero());
                    for (j, node) in nodes.iter().enumerate() {
                        let u = cell(level, j);
                        row += u;
                        row_fast += u * node.0;
                    }
                    s0 += row * sp;
                    s1 += row_fast;
                }
                let scale = T::lit(2.0) * self.rho / (nf * nf);
                let n1 = scale * s1 / a;
                let n0 = if bias.is_zero() {
                    self.iidf(a)
                } else {
                    scale * s0 / bias
                };
                (n0, n1)
            }
        }
    }
}

fn rel_change<T: Scalar>(a: T, b: T) -> T {
    let d = (a - b).abs();
    let m = a.abs().max(b.abs());
    if m.is_zero() {
        T::zero()
    } else {
        d / m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const RELAY: RelayDf<f64> = RelayDf { rho: 5.0 };

    #[test]
    fn bias_gain_examples() {
        let q = DfQuery::new(0.1634, 0.0448);
        let u0 = RELAY.bias_gain(&q).unwrap() * q.bias;
        assert!((u0 - 0.8840).abs() < 5e-5, "{u0}");

        let n0 = RELAY.bias_gain(&DfQuery::new(0.1591, 0.0)).unwrap();
        assert!((n0 - 20.0).abs() < 0.01);

        let q = DfQuery::new(1.0, 1.0 - 1e-12);
        let u0 = RELAY.bias_gain(&q).unwrap() * q.bias;
        assert!((u0 - 5.0).abs() < 1e-5);

        assert!(matches!(
            RELAY.bias_gain(&DfQuery::new(0.1, 0.1)),
            Err(DfError::Domain { .. })
        ));
    }

    #[test]
    fn avg_control_examples() {
        // oracle: mean of ρ·sign(σ0 + A·sin θ) over a fine phase grid
        let (a, s0) = (0.1591, 0.1);
        let n = 200_000;
        let mean = (0..n)
            .map(|k| {
                let th = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                5.0 * (s0 + a * th.sin()).signum()
            })
            .sum::<f64>()
            / n as f64;
        let u0 = RELAY.avg_control(a, s0).unwrap();
        assert!((u0 - mean).abs() < 1e-4, "{u0} vs {mean}");
        assert!((u0 - 2.163).abs() < 5e-4);
        assert_eq!(RELAY.avg_control(0.1591, 0.0).unwrap(), 0.0);
        assert_relative_eq!(RELAY.avg_control(0.2, 0.2).unwrap(), 5.0, epsilon = 1e-12);
        assert!(RELAY.avg_control(0.2, 0.21).is_err());
    }

    #[test]
    fn sidf_examples() {
        let n1 = RELAY.sidf(&DfQuery::new(0.1591, 0.0)).unwrap();
        assert_relative_eq!(n1, 20.0 / (PI * 0.1591), epsilon = 1e-12);
        assert!((n1 - 40.0).abs() < 0.02);
        let q = DfQuery::new(0.1576, 0.0);
        assert!((RELAY.sidf(&q).unwrap() * q.amplitude - 6.366).abs() < 5e-4);
        let q = DfQuery::new(0.1634, 0.0448);
        assert!((RELAY.sidf(&q).unwrap() * q.amplitude - 6.122).abs() < 5e-4);
    }

    #[test]
    fn iidf_examples() {
        assert!((RELAY.iidf(0.1591) - 20.0).abs() < 0.01);
        assert!((RELAY.iidf(0.1576) * 0.0447 - 0.9028).abs() < 5e-4);
        for a in [0.01, 0.1591, 2.0] {
            let n1 = RELAY.sidf(&DfQuery::new(a, 0.0)).unwrap();
            assert_relative_eq!(RELAY.iidf(a), n1 / 2.0, epsilon = 1e-14);
            assert_eq!(RELAY.iidf(a), RELAY.equivalent_gain(a));
        }
    }

    #[test]
    fn iidf_matches_its_derivative_construction() {
        // N1 + (A/2) dN1/dA by central difference
        let a = 0.17;
        let n1 = |a: f64| RELAY.sidf(&DfQuery::new(a, 0.0)).unwrap();
        let h = 1e-6 * a;
        let d = (n1(a + h) - n1(a - h)) / (2.0 * h);
        assert_relative_eq!(n1(a) + a / 2.0 * d, RELAY.iidf(a), max_relative = 1e-8);
    }

    #[test]
    fn equivalent_gain_examples() {
        let mu = 0.05;
        assert_relative_eq!(RELAY.equivalent_gain(10.0 * mu / PI), 20.0, epsilon = 1e-12);
        let b = 1.0;
        let a = 10.0 * mu / (PI * (1.0 - 2.0 * b * mu));
        assert_relative_eq!(RELAY.equivalent_gain(a), 18.0, epsilon = 1e-12);
        let scaled = RelayDf::new(15.0).equivalent_gain(0.2);
        assert_relative_eq!(scaled, 3.0 * RELAY.equivalent_gain(0.2), epsilon = 1e-12);
    }

    #[test]
    fn didf_series_examples() {
        let (n0, n1) = RELAY.didf_series(0.3, 0.0, 3).unwrap();
        assert_relative_eq!(n0, 10.0 / (PI * 0.3));
        assert_relative_eq!(n1, 20.0 / (PI * 0.3));

        let (n0, _) = RELAY.didf_series(0.1576, 0.0447, 3).unwrap();
        let x = 0.2836_f64;
        let expect = 10.0 / (PI * 0.1576) * (1.0 + x * x / 8.0 + 3.0 * x.powi(4) / 64.0);
        assert!((n0 - expect).abs() / expect < 1e-3);
        assert!((n0 - 20.40).abs() < 0.01);

        assert!(matches!(RELAY.didf_series(1.0, 0.1, 4), Err(DfError::SeriesOrder(4))));
        assert!(RELAY.didf_series(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn didf_numeric_small_bias_limits() {
        let a = 0.2;
        let (n0, n1) = RELAY.didf_numeric(a, 1e-3).unwrap();
        assert!((n0 / RELAY.iidf(a) - 1.0).abs() < 5e-3);
        assert!((n1 / (2.0 * RELAY.iidf(a)) - 1.0).abs() < 5e-3);
        let (n0, _) = RELAY.didf_numeric(a, 0.0).unwrap();
        assert_eq!(n0, RELAY.iidf(a));
    }

    #[test]
    fn didf_numeric_odd_symmetry() {
        let (p0, p1) = RELAY.didf_numeric(1.0, 0.25).unwrap();
        let (m0, m1) = RELAY.didf_numeric(1.0, -0.25).unwrap();
        assert_relative_eq!(p0 * 0.25, -(m0 * -0.25), max_relative = 1e-12);
        assert_relative_eq!(p1, m1, max_relative = 1e-12);
    }

    #[test]
    fn series_agrees_with_quadrature() {
        for x in [0.05, 0.1, 0.2, 0.3] {
            let (s0, s1) = RELAY.didf_series(1.0, x, 3).unwrap();
            let (q0, q1) = RELAY.didf_numeric(1.0, x).unwrap();
            let tol = if x <= 0.2 { 0.01 } else { 0.02 };
            assert!((s0 - q0).abs() / q0 < tol, "N0 at {x}: {s0} vs {q0}");
            assert!((s1 - q1).abs() / q1 < tol, "N1 at {x}: {s1} vs {q1}");
        }
    }

    #[test]
    fn constant_bias_quadrature_matches_closed_forms() {
        for x in [0.0, 0.1, 0.3, 0.7] {
            let (n0, n1) = RELAY.didf_numeric_with(1.0, x, SlowInput::Constant).unwrap();
            let q = DfQuery::new(1.0, x);
            assert!((n0 / RELAY.bias_gain(&q).unwrap() - 1.0).abs() < 1e-3);
            assert!((n1 / RELAY.sidf(&q).unwrap() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn sidf_decreases_to_zero() {
        let a = 1.0;
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let x = i as f64 / 100.0;
            let v = RELAY.sidf(&DfQuery::new(a, x)).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(RELAY.sidf(&DfQuery::new(a, 1.0 - 1e-12)).unwrap() < 1e-4);
    }

    #[test]
    fn small_bias_flag() {
        assert!(!DfQuery::new(0.15, 0.0999).small_bias_violated());
        assert!(DfQuery::new(0.15, 0.11).small_bias_violated());
    }
}
