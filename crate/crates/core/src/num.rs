//! Scalar abstraction for the floating-point parts of the pipeline.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar usable by the line fit, classifier and trainer: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Default + Debug + Send + Sync + 'static
{
    /// Converts an `f64` constant. Never fails for the implemented types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Euclidean norm of an RGB triple.
#[inline]
pub fn norm3<T: Real>(v: [T; 3]) -> T {
    dot3(v, v).sqrt()
}

#[inline]
pub fn dot3<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
