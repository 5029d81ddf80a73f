use std::fmt::{Debug, Display};

/// Element type of tensors: f64 for verification suites (finite-difference
/// tolerances need the headroom), f32 for training.
pub trait Scalar:
    num_traits::Float + num_traits::NumAssign + Debug + Display + Copy + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}
