//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! Orbit iteration, partition construction and renormalization are written
//! once against [`Real`] and instantiated at `f32`, `f64` or
//! [`DoubleDouble`](crate::dd::DoubleDouble).

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_traits::{FromPrimitive, Num, NumAssign, ToPrimitive};

/// Real scalar field with the handful of transcendental functions the
/// dynamics needs.
///
/// Trigonometry is exposed in *turns* (`sin(2πx)`), because every circle map
/// in the crate is periodic with period one and the reduction `x mod 1` is
/// exact in binary floating point.
pub trait Real:
    Num
    + NumAssign
    + Neg<Output = Self>
    + Copy
    + PartialOrd
    + Debug
    + Display
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// Short tag used in reports and baselines ("f64", "dd", ...).
    const NAME: &'static str;

    /// Unit roundoff of the representation.
    fn epsilon() -> Self;
    fn pi() -> Self;
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;

    fn abs(self) -> Self;
    fn floor(self) -> Self;
    fn round(self) -> Self;
    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn atan(self) -> Self;
    /// `(sin 2πx, cos 2πx)`.
    fn sin_cos_turns(self) -> (Self, Self);
    fn is_finite(self) -> bool;

    fn tau() -> Self {
        Self::pi() + Self::pi()
    }

    fn half() -> Self {
        Self::of(0.5)
    }

    fn from_u64_exact(n: u64) -> Self {
        <Self as FromPrimitive>::from_u64(n).expect("u64 is representable")
    }

    fn from_i64_exact(n: i64) -> Self {
        <Self as FromPrimitive>::from_i64(n).expect("i64 is representable")
    }

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Fractional part in `[0, 1)`.
    fn fract_pos(self) -> Self {
        let r = self - self.floor();
        if r >= Self::one() {
            r - Self::one()
        } else {
            r
        }
    }

    /// Signed displacement `x - y` reduced to `[-1/2, 1/2)`.
    fn circle_diff(self, other: Self) -> Self {
        let d = self - other;
        d - d.round()
    }

    /// Distance on `R/Z`.
    fn circle_dist(self, other: Self) -> Self {
        self.circle_diff(other).abs()
    }
}

macro_rules! impl_real_native {
    ($t:ty, $name:expr) => {
        impl Real for $t {
            const NAME: &'static str = $name;

            #[inline]
            fn epsilon() -> Self {
                <$t>::EPSILON * 0.5
            }
            #[inline]
            fn pi() -> Self {
                std::f64::consts::PI as $t
            }
            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }
            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn abs(self) -> Self {
                <$t>::abs(self)
            }
            #[inline]
            fn floor(self) -> Self {
                <$t>::floor(self)
            }
            #[inline]
            fn round(self) -> Self {
                <$t>::round(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn ln(self) -> Self {
                <$t>::ln(self)
            }
            #[inline]
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            #[inline]
            fn atan(self) -> Self {
                <$t>::atan(self)
            }
            #[inline]
            fn sin_cos_turns(self) -> (Self, Self) {
                // exact reduction to [-1/2, 1/2] before scaling by 2π
                let r = self - <$t>::round(self);
                (r * (2.0 * std::f64::consts::PI as $t)).sin_cos()
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
        }
    };
}

impl_real_native!(f64, "f64");
impl_real_native!(f32, "f32");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_metric_wraps() {
        assert!((0.95f64.circle_dist(0.05) - 0.1).abs() < 1e-15);
        assert!((0.05f64.circle_diff(0.95) - 0.1).abs() < 1e-15);
        assert!((0.95f64.circle_diff(0.05) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn turns_trig_is_periodic() {
        let (s0, c0) = 0.3f64.sin_cos_turns();
        let (s1, c1) = 1000.3f64.sin_cos_turns();
        assert!((s0 - s1).abs() < 1e-12 && (c0 - c1).abs() < 1e-12);
        let (s, c) = 0.25f32.sin_cos_turns();
        assert!((s - 1.0).abs() < 1e-6 && c.abs() < 1e-6);
    }

    #[test]
    fn fract_pos_is_in_unit_interval() {
        for x in [-3.25f64, -1e-18, 0.0, 0.999, 7.5] {
            let r = x.fract_pos();
            assert!((0.0..1.0).contains(&r), "{x} -> {r}");
        }
    }
}
