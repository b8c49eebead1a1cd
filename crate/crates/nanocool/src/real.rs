//! Scalar abstraction for the closed-form layer.
//!
//! Every analytic formula in this crate is written against [`Real`] so the
//! algebra can be instantiated at `f32` or `f64`. Simulation and linear
//! algebra stay pinned to `f64`; the crate root exports concrete aliases.

use num_traits::{Float, FloatConst};

/// Real scalar used by the closed-form expressions.
pub trait Real: Float + FloatConst + std::fmt::Debug + std::fmt::Display + 'static {
    /// Conversion from an `f64` literal appearing in a formula.
    fn lit(x: f64) -> Self;

    /// Lossy conversion to `f64`, for diagnostics and error payloads.
    fn as_f64(self) -> f64;
}

impl Real for f64 {
    fn lit(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    fn lit(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}
