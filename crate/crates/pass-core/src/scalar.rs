//! Generic floating-point scalar used by every numeric module.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};

/// Floating-point scalar the whole crate is generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssignOps
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` literal into this scalar type.
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("literal not representable in scalar type")
    }

    /// `10^(db/10)`: decibel power ratio to linear.
    #[inline]
    fn db_to_linear(db: Self) -> Self {
        Self::of(10.0).powf(db / Self::of(10.0))
    }

    /// `10^((dbm - 30)/10)`: dBm to watts.
    #[inline]
    fn dbm_to_watts(dbm: Self) -> Self {
        Self::db_to_linear(dbm - Self::of(30.0))
    }

    /// `10^(dbw/10)`: dBW to watts.
    #[inline]
    fn dbw_to_watts(dbw: Self) -> Self {
        Self::db_to_linear(dbw)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over the crate scalar.
pub type C<T> = Complex<T>;

/// Relative change `|new - old| / max(|old|, floor)`, guarded against a zero
/// reference value at cold start.
#[inline]
pub fn rel_change<T: Real>(new: T, old: T) -> T {
    (new - old).abs() / old.abs().max(T::of(1e-30))
}
