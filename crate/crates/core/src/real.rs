//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over [`Real`], which is
//! satisfied by `f32` and `f64`. The CLI and the on-disk formats use `f64`;
//! the `f32` instantiation exists for memory-bound batch work.

use ndarray::ScalarOperand;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn real<S: Real>(x: f64) -> S {
    S::from_f64(x).expect("constant representable in scalar type")
}

/// Converts a count into the working scalar type.
#[inline]
pub fn real_of<S: Real>(n: usize) -> S {
    real(n as f64)
}
