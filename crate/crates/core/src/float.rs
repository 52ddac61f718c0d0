use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

/// Scalar type the numerical core is generic over. Covers `f32` and `f64`;
/// the crate-root aliases pin `f64` for everyday use.
pub trait Real: Float + Sum + Debug + Display + Default + 'static {}

impl<T> Real for T where T: Float + Sum + Debug + Display + Default + 'static {}

/// Shorthand for pulling `f64` literals into a generic scalar context.
#[inline]
pub(crate) fn lit<F: Real>(x: f64) -> F {
    F::from(x).expect("literal representable in scalar type")
}
