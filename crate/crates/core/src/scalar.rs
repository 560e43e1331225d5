//! Scalar abstraction shared by every module.
//!
//! All numerics are written against [`Real`], which bundles nalgebra's
//! `RealField` (for the dense linear algebra) with the num-traits
//! conversion traits. `f64` is the working precision; `f32` is supported
//! with correspondingly looser tolerances.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar usable by the moment-system code.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Display
    + Debug
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Machine epsilon of the type.
    fn eps() -> Self;

    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count or index.
    #[inline]
    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Default relative tolerance for eigen-analysis verdicts: `1e-9` in
    /// double precision, widened to `1e4 * eps` for shorter types.
    fn default_tol() -> Self {
        let floor = Self::lit(1e4) * Self::eps();
        let t = Self::lit(1e-9);
        if floor > t {
            floor
        } else {
            t
        }
    }

    fn is_finite_val(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}
