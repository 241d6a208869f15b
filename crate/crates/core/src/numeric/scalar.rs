use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Floating-point type the generic parts of the crate are written against.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every supported scalar")
    }

    /// Conversion back to `f64` for reporting.
    fn to_f(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Smallest weight kept by multiplicative updates so a coordinate never underflows to zero.
    fn weight_floor() -> Self {
        let floor = Self::of(1e-300);
        if floor > Self::zero() {
            floor
        } else {
            Self::min_positive_value()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
