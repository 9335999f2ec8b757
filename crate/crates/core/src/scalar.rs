use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Storage scalar for feature matrices, operators and the linear head.
///
/// Reductions are always carried out in `f64`; the scalar only decides how
/// values are stored between passes.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    #[inline]
    fn of_f64(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("float cast from f64 is total")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float cast to f64 is total")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product of two equally long slices with an `f64` accumulator, summed
/// in index order.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        acc += x.as_f64() * y.as_f64();
    }
    acc
}
