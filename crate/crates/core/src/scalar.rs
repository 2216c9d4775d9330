//! Scalar abstraction shared by the floating-point layers.
//!
//! Family evaluation, orbit iteration and the Böttcher machinery are written
//! once against [`Real`]; exact work (coefficients, angles) lives on
//! `BigRational` and is converted into a `Real` exactly once.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating scalar usable by the numeric layers: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64` for constants.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// Converts an exact rational, rounding once.
    fn from_rational(r: &BigRational) -> Self {
        Self::lit(rational_to_f64(r))
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + NumAssign + Debug + Default + Send + Sync + 'static
{
}

/// Converts a rational to the nearest-ish `f64` without overflowing on huge
/// numerators or denominators.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Shift both sides down so they fit before dividing.
    let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
    let n: BigInt = r.numer() >> shift;
    let d: BigInt = r.denom() >> shift;
    n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
}

pub fn is_finite<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// `z^n` by repeated multiplication. Unlike `powc` this keeps exact symmetry
/// under `z -> conj(z)` and rotations by roots of unity.
#[inline]
pub fn powu<T: Real>(z: Complex<T>, n: u32) -> Complex<T> {
    let mut acc = Complex::new(T::one(), T::zero());
    let mut base = z;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base;
        }
        e >>= 1;
        if e > 0 {
            base = base * base;
        }
    }
    acc
}

/// Squared modulus; avoids the `hypot` call in hot loops.
#[inline]
pub fn norm_sqr<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}
