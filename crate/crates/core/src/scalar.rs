//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the analysis and simulation code is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Infallible for the implemented types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts an index or count.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sign function with `sign(0) = 0`.
///
/// `Float::signum` maps `+0.0` to `1.0`, which is not the set-valued reading of
/// the discontinuous controller.
#[inline]
pub fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_degrees<T: Scalar>(deg: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let mut d = deg % full;
    if d <= -half {
        d += full;
    } else if d > half {
        d -= full;
    }
    d
}

/// `count` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn logspace<T: Scalar>(lo: T, hi: T, count: usize) -> Vec<T> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let step = (b - a) / T::from_usize_lossy(count - 1);
            (0..count)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == count - 1 {
                        hi
                    } else {
                        (a + step * T::from_usize_lossy(i)).exp()
                    }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_of_zero_is_zero() {
        assert_eq!(sign(0.0_f64), 0.0);
        assert_eq!(sign(-0.0_f64), 0.0);
        assert_eq!(sign(3.0_f32), 1.0);
        assert_eq!(sign(-1e-300_f64), -1.0);
    }

    #[test]
    fn wrap_keeps_half_open_interval() {
        assert_eq!(wrap_degrees(180.0_f64), 180.0);
        assert_eq!(wrap_degrees(-180.0_f64), 180.0);
        assert!((wrap_degrees(370.0_f64) - 10.0).abs() < 1e-12);
        assert!((wrap_degrees(-190.0_f64) - 170.0).abs() < 1e-12);
    }

    #[test]
    fn logspace_endpoints() {
        let g = logspace(0.01_f64, 100.0, 5);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[4], 100.0);
        assert!((g[2] - 1.0).abs() < 1e-12);
    }
}
