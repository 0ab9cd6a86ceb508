use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::Serialize;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point type the numeric core is generic over (`f32` or `f64`).
///
/// The associated constants carry the precision-dependent defaults: the
/// relative deviance tolerance used to stop IWLS and the largest condition
/// number of the weighted cross-product accepted before a fit is declared
/// singular.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Serialize + Send + Sync + 'static
{
    const DEVIANCE_TOL: f64;
    const MAX_CONDITION: f64;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 value representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f64 {
    const DEVIANCE_TOL: f64 = 1e-8;
    const MAX_CONDITION: f64 = 1e12;
}

impl Scalar for f32 {
    const DEVIANCE_TOL: f64 = 1e-5;
    const MAX_CONDITION: f64 = 1e6;
}
