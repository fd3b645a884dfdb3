//! Scalar abstractions.
//!
//! [`Real`] is the floating-point bound used by the density-evolution code.
//! [`Weight`] is the weaker ring bound needed to sum walk-graph pattern
//! probabilities, which also admits exact rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, Num};

/// Floating point: f32 or f64.
pub trait Real:
    Float + FloatConst + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every `Real` can represent (an approximation of) any f64.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Anything pattern probabilities can be summed and multiplied in.
pub trait Weight: Num + Copy + PartialOrd + Debug {}

impl<T> Weight for T where T: Num + Copy + PartialOrd + Debug {}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<F> {
    sum: F,
    carry: F,
}

impl<F: Real> Default for CompensatedSum<F> {
    fn default() -> Self {
        Self {
            sum: F::zero(),
            carry: F::zero(),
        }
    }
}

impl<F: Real> CompensatedSum<F> {
    pub fn add(&mut self, v: F) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry = self.carry + ((self.sum - t) + v);
        } else {
            self.carry = self.carry + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> F {
        self.sum + self.carry
    }
}

/// Clamps float noise into [0, 1]; anything further out than 1e-6 is a logic error.
pub(crate) fn clamp_prob<F: Real>(v: F, context: &'static str) -> crate::Result<F> {
    let slack = F::lit(1e-6);
    if v.is_nan() || v < -slack || v > F::one() + slack {
        return Err(crate::Error::Probability {
            value: v.to_f64().unwrap_or(f64::NAN),
            context,
        });
    }
    Ok(v.max(F::zero()).min(F::one()))
}
