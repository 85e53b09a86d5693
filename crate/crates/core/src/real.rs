//! Scalar abstraction: all solvers are generic over a floating-point type.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the solvers are written against: f32 or f64.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Shorthand for lossy conversion of an f64 constant.
    fn of(x: f64) -> Self {
        Self::from_f64(x).unwrap()
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).unwrap()
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}
