//! Rational transfer functions of the Laplace variable.
//!
//! Coefficients are stored in ascending powers of `s`, so `[0, 1, 0.1, 0.0025]`
//! is `s + 0.1 s^2 + 0.0025 s^3`. No pole-zero cancellation is ever performed.

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Scalar;

/// Relative guard used for pole/zero-on-axis detection.
const AXIS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LtiError {
    #[error("denominator has no nonzero coefficient")]
    ZeroDenominator,
    #[error("pole on the imaginary axis at omega = {omega}")]
    PoleOnAxis { omega: f64 },
    #[error("zero on the imaginary axis at omega = {omega}")]
    ZeroOnAxis { omega: f64 },
    #[error("final-value limit does not exist: closed loop keeps a pole at s = 0")]
    PoleAtOrigin,
    #[error("non-finite frequency {omega}")]
    NonFiniteFrequency { omega: f64 },
}

/// Ratio of two real polynomials in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransferFunction<T> {
    num: Vec<T>,
    den: Vec<T>,
}

impl<T: Scalar> RationalTransferFunction<T> {
    /// Builds a transfer function from ascending-power coefficients, trimming
    /// trailing zeros. An all-zero numerator is stored as `[0]`.
    pub fn new(num: Vec<T>, den: Vec<T>) -> Result<Self, LtiError> {
        let den = trim(den);
        if den.iter().all(|c| c.is_zero()) {
            return Err(LtiError::ZeroDenominator);
        }
        Ok(Self { num: trim(num), den })
    }

    pub fn gain(k: T) -> Self {
        Self {
            num: vec![k],
            den: vec![T::one()],
        }
    }

    pub fn identity() -> Self {
        Self::gain(T::one())
    }

    /// `1/s`
    pub fn integrator() -> Self {
        Self {
            num: vec![T::one()],
            den: vec![T::zero(), T::one()],
        }
    }

    /// Polynomial (possibly improper) block `p(s) / 1`.
    pub fn polynomial(coeffs: Vec<T>) -> Self {
        Self {
            num: trim(coeffs),
            den: vec![T::one()],
        }
    }

    /// `s + b`, the sensor that rebuilds `S = σ' + bσ` from the error.
    pub fn lead(b: T) -> Self {
        Self::polynomial(vec![b, T::one()])
    }

    /// Critically damped second-order actuator `1/(μs + 1)^2`.
    pub fn critically_damped(mu: T) -> Self {
        let two = T::lit(2.0);
        Self {
            num: vec![T::one()],
            den: trim(vec![T::one(), two * mu, mu * mu]),
        }
    }

    pub fn numerator(&self) -> &[T] {
        &self.num
    }

    pub fn denominator(&self) -> &[T] {
        &self.den
    }

    /// `N(s)` and `D(s)` at an arbitrary complex point.
    pub fn eval_parts(&self, s: Complex<T>) -> (Complex<T>, Complex<T>) {
        (horner(&self.num, s), horner(&self.den, s))
    }

    /// Frequency response `N(jω)/D(jω)`.
    pub fn evaluate(&self, omega: T) -> Result<Complex<T>, LtiError> {
        check_finite(omega)?;
        let (n, d) = self.eval_parts(Complex::new(T::zero(), omega));
        if d.norm() < axis_eps(&self.den) {
            return Err(LtiError::PoleOnAxis { omega: omega.as_f64() });
        }
        Ok(n / d)
    }

    /// Real and imaginary parts of `D(jω)/N(jω)`, i.e. of `1/W(jω)`.
    pub fn inverse_response(&self, omega: T) -> Result<(T, T), LtiError> {
        check_finite(omega)?;
        let (n, d) = self.eval_parts(Complex::new(T::zero(), omega));
        if n.norm() < axis_eps(&self.num) {
            return Err(LtiError::ZeroOnAxis { omega: omega.as_f64() });
        }
        let r = d / n;
        Ok((r.re, r.im))
    }

    /// Cascade `self · other`.
    pub fn series(&self, other: &Self) -> Self {
        Self {
            num: trim(poly_mul(&self.num, &other.num)),
            den: trim(poly_mul(&self.den, &other.den)),
        }
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            num: trim(self.num.iter().map(|&c| c * k).collect()),
            den: self.den.clone(),
        }
    }

    /// `self / (1 + k · loop_tf)`: the transfer from an injected signal
    /// through `self` around a negative-feedback loop with gain `k`.
    pub fn feedback(&self, loop_tf: &Self, k: T) -> Self {
        // (Pn/Pd) / (1 + k Ln/Ld) = Pn Ld / (Pd (Ld + k Ln))
        let closed = poly_add(&loop_tf.den, &loop_tf.num.iter().map(|&c| c * k).collect::<Vec<_>>());
        Self {
            num: trim(poly_mul(&self.num, &loop_tf.den)),
            den: trim(poly_mul(&self.den, &closed)),
        }
    }

    /// `lim_{s→0} H(s)`, read off the lowest-order nonzero coefficients.
    ///
    /// Exact zeros produced by integrators survive polynomial products, so the
    /// comparison is against exact zero rather than a tolerance.
    pub fn dc_limit(&self) -> Result<T, LtiError> {
        let Some(kn) = lowest_nonzero(&self.num) else {
            return Ok(T::zero());
        };
        let kd = lowest_nonzero(&self.den).ok_or(LtiError::ZeroDenominator)?;
        match kn.cmp(&kd) {
            std::cmp::Ordering::Greater => Ok(T::zero()),
            std::cmp::Ordering::Equal => Ok(self.num[kn] / self.den[kd]),
            std::cmp::Ordering::Less => Err(LtiError::PoleAtOrigin),
        }
    }

    /// `deg D - deg N`; negative for improper ratios.
    pub fn relative_degree(&self) -> isize {
        self.den.len() as isize - self.num.len() as isize
    }
}

fn check_finite<T: Scalar>(omega: T) -> Result<(), LtiError> {
    if omega.is_finite() {
        Ok(())
    } else {
        Err(LtiError::NonFiniteFrequency { omega: omega.as_f64() })
    }
}

fn axis_eps<T: Scalar>(coeffs: &[T]) -> T {
    let max = coeffs.iter().fold(T::zero(), |m, c| m.max(c.abs()));
    T::lit(AXIS_EPS) * max
}

fn lowest_nonzero<T: Scalar>(p: &[T]) -> Option<usize> {
    p.iter().position(|c| !c.is_zero())
}

fn trim<T: Scalar>(mut p: Vec<T>) -> Vec<T> {
    while p.len() > 1 && p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    if p.is_empty() {
        p.push(T::zero());
    }
    p
}

fn horner<T: Scalar>(p: &[T], s: Complex<T>) -> Complex<T> {
    p.iter()
        .rev()
        .fold(Complex::new(T::zero(), T::zero()), |acc, &c| acc * s + c)
}

fn poly_mul<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or_else(T::zero) + b.get(i).copied().unwrap_or_else(T::zero))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    type Tf = RationalTransferFunction<f64>;

    fn relay_block(mu: f64) -> Tf {
        Tf::critically_damped(mu).series(&Tf::integrator())
    }

    #[test]
    fn relay_block_at_corner_frequency() {
        // 1/W = jω(1 + jμω)^2 = -2μω² + jω(1 - μ²ω²) = -40 at μω = 1
        let w = relay_block(0.05).evaluate(20.0).unwrap();
        assert_relative_eq!(w.re, -0.025, epsilon = 1e-15);
        assert!(w.im.abs() < 1e-15);
    }

    #[test]
    fn integrator_response() {
        let g = Tf::integrator().evaluate(1.0).unwrap();
        assert_eq!((g.re, g.im), (0.0, -1.0));
    }

    #[test]
    fn series_coefficients() {
        let w = relay_block(0.05);
        assert_eq!(w.numerator(), &[1.0]);
        let d = w.denominator();
        assert_eq!(d.len(), 4);
        assert_eq!(d[0], 0.0);
        assert_relative_eq!(d[1], 1.0);
        assert_relative_eq!(d[2], 0.1);
        assert_relative_eq!(d[3], 0.0025);

        let id = Tf::identity().series(&w);
        assert_eq!(id, w);
    }

    #[test]
    fn lipschitz_block_form() {
        let g = Tf::integrator();
        let w = Tf::lead(1.0).series(&Tf::critically_damped(0.05)).series(&g).series(&g);
        assert_eq!(w.numerator(), &[1.0, 1.0]);
        let d = w.denominator();
        assert_eq!(&d[..2], &[0.0, 0.0]);
        assert_relative_eq!(d[2], 1.0);
        assert_relative_eq!(d[3], 0.1);
        assert_relative_eq!(d[4], 0.0025);
    }

    #[test]
    fn inverse_response_examples() {
        let w = relay_block(0.05);
        let (re, im) = w.inverse_response(20.0).unwrap();
        assert_relative_eq!(re, -40.0, epsilon = 1e-12);
        assert!(im.abs() < 1e-12);
        let (re, im) = w.inverse_response(10.0).unwrap();
        assert_relative_eq!(re, -10.0, epsilon = 1e-12);
        assert_relative_eq!(im, 7.5, epsilon = 1e-12);
        let (re, im) = Tf::integrator().inverse_response(5.0).unwrap();
        assert_eq!((re, im), (0.0, 5.0));
    }

    #[test]
    fn relay_sensitivity_magnitude_at_two_rad() {
        let mu = 0.05;
        let g = Tf::integrator();
        let s = g.feedback(&relay_block(mu), 20.0);
        let h = s.evaluate(2.0).unwrap();
        assert!((h.norm() - 0.0513).abs() < 5e-5);
    }

    #[test]
    fn axis_errors() {
        assert!(matches!(
            Tf::integrator().evaluate(0.0),
            Err(LtiError::PoleOnAxis { .. })
        ));
        let s = Tf::polynomial(vec![0.0, 1.0]);
        assert!(matches!(s.inverse_response(0.0), Err(LtiError::ZeroOnAxis { .. })));
        assert!(matches!(
            Tf::new(vec![1.0], vec![0.0, 0.0]),
            Err(LtiError::ZeroDenominator)
        ));
        assert!(Tf::integrator().evaluate(f64::NAN).is_err());
    }

    #[test]
    fn canonical_trim() {
        let tf = Tf::new(vec![1.0, 2.0, 0.0], vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(tf.numerator(), &[1.0, 2.0]);
        assert_eq!(tf.denominator(), &[1.0]);
        assert_eq!(tf.relative_degree(), -1);
    }

    #[test]
    fn dc_limit_cases() {
        let mu = 0.05;
        let g = Tf::integrator();
        // relay: G/(1 + Kn W) -> 1/Kn
        let h = g.feedback(&relay_block(mu), 20.0);
        assert_relative_eq!(h.dc_limit().unwrap(), 0.05, epsilon = 1e-15);
        // open integrator keeps a pole at the origin
        assert_eq!(g.dc_limit(), Err(LtiError::PoleAtOrigin));
        // differentiator -> 0
        assert_eq!(Tf::polynomial(vec![0.0, 1.0]).dc_limit(), Ok(0.0));
    }

    #[test]
    fn generic_over_f32() {
        let w =
            RationalTransferFunction::<f32>::critically_damped(0.05).series(&RationalTransferFunction::integrator());
        let (re, _) = w.inverse_response(20.0).unwrap();
        assert!((re + 40.0).abs() < 1e-3);
    }

    fn arb_tf() -> impl Strategy<Value = Tf> {
        (
            prop::collection::vec(-5.0..5.0_f64, 1..4),
            prop::collection::vec(0.1..5.0_f64, 1..5),
        )
            .prop_map(|(n, d)| Tf::new(n, d).unwrap())
    }

    proptest! {
        #[test]
        fn series_is_pointwise_product(a in arb_tf(), b in arb_tf(), w in 0.01..100.0_f64) {
            let (Ok(x), Ok(y)) = (a.evaluate(w), b.evaluate(w)) else { return Ok(()) };
            let z = a.series(&b).evaluate(w).unwrap();
            let p = x * y;
            prop_assert!((z - p).norm() <= 1e-12 * p.norm().max(1e-300) + 1e-300);
        }

        #[test]
        fn inverse_is_reciprocal(a in arb_tf(), w in 0.01..100.0_f64) {
            let (Ok(x), Ok((re, im))) = (a.evaluate(w), a.inverse_response(w)) else { return Ok(()) };
            let r = x.inv();
            prop_assert!((r.re - re).abs() <= 1e-9 * r.norm());
            prop_assert!((r.im - im).abs() <= 1e-9 * r.norm());
        }

        #[test]
        fn conjugate_symmetry(a in arb_tf(), w in 0.01..100.0_f64) {
            let (Ok(x), Ok(y)) = (a.evaluate(w), a.evaluate(-w)) else { return Ok(()) };
            prop_assert!((x.conj() - y).norm() <= 1e-12 * x.norm());
        }
    }
}
