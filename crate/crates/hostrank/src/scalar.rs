use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the numeric pipeline is generic over: f32 or f64.
///
/// Everything numeric in this crate (normalization, SMOTE, the tree, the
/// centroid classifier, the SVM solver, DCG) is written against this trait;
/// the crate root exports concrete `f64` aliases for the common case.
pub trait Real: Float + FromPrimitive + Display + Debug + Send + Sync + 'static {
    /// Lossy conversion from f64, for constants and parsed text.
    fn from_f64_const(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to any Real")
    }

    /// Conversion from a count.
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize converts to any Real")
    }

    /// Widening view used for text output and cross-type math.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("any Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip_for_f64() {
        let v = 0.123456789012345_f64;
        assert_eq!(f64::from_f64_const(v), v);
        assert_eq!(v.as_f64(), v);
        assert_eq!(f64::from_count(41), 41.0);
    }

    #[test]
    fn f32_is_usable() {
        let v = f32::from_f64_const(0.25);
        assert_eq!(v, 0.25f32);
        assert_eq!(f32::from_count(3), 3.0f32);
    }
}
