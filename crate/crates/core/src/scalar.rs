//! Real-valued scalar abstraction shared by curves, emotion samples and the
//! generators. Implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used for curve values and emotional parameters.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Only used with small finite constants.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Clamps into the unit interval. NaN maps to zero.
    fn unit(self) -> Self {
        if self.is_nan() {
            Self::zero()
        } else {
            self.max(Self::zero()).min(Self::one())
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
