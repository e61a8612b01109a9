//! Double-double arithmetic: an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`,
//! giving roughly 106 bits of significand.
//!
//! The error-free transformations follow the usual Dekker/Knuth/QD recipes;
//! transcendental functions seed from `f64` and polish with a Newton step or
//! a short Taylor series on a reduced argument.

use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};
use std::str::FromStr;

use num_traits::{FromPrimitive, Num, One, ToPrimitive, Zero};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const PI: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::PI,
    lo: 1.224_646_799_147_353_2e-16,
};
const TAU: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::TAU,
    lo: 2.449_293_598_294_706_4e-16,
};
const LN2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};
const E: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::E,
    lo: 1.445_646_891_729_250_2e-16,
};

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };
    pub const PI: Self = PI;
    pub const TAU: Self = TAU;
    pub const LN2: Self = LN2;
    pub const E: Self = E;
    /// 2^-104.
    pub const EPSILON: Self = Self {
        hi: 4.930_380_657_631_324e-32,
        lo: 0.0,
    };

    /// Builds a normalized value from two arbitrary doubles.
    pub fn new(hi: f64, lo: f64) -> Self {
        let (h, l) = two_sum(hi, lo);
        Self { hi: h, lo: l }
    }

    pub const fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    /// Exact ratio `n / d` rounded to double-double.
    pub fn ratio(n: i64, d: i64) -> Self {
        Self::from_i64_exact(n) / Self::from_i64_exact(d)
    }

    /// Multiplication by `2^k`, exact barring over/underflow.
    pub fn ldexp(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        Self {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    pub fn sqr(self) -> Self {
        let (p, e) = two_prod(self.hi, self.hi);
        let e = e + 2.0 * self.hi * self.lo;
        let (h, l) = quick_two_sum(p, e);
        Self { hi: h, lo: l }
    }

    pub fn powi(self, mut n: i32) -> Self {
        if n == 0 {
            return Self::ONE;
        }
        let inv = n < 0;
        n = n.abs();
        let mut base = self;
        let mut acc = Self::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc *= base;
            }
            base = base.sqr();
            n >>= 1;
        }
        if inv {
            Self::ONE / acc
        } else {
            acc
        }
    }

    pub fn trunc(self) -> Self {
        if self.hi >= 0.0 {
            Real::floor(self)
        } else {
            -Real::floor(-self)
        }
    }

    fn from_i128(n: i128) -> Self {
        let hi = n as f64;
        let rest = n - hi as i128;
        Self::new(hi, rest as f64)
    }

    /// `exp(r) - 1` for small `|r|`, by Taylor series.
    fn expm1_small(r: Self) -> Self {
        let mut term = r;
        let mut sum = r;
        for k in 2..=14u32 {
            term = term * r / Self::from_f64(k as f64);
            sum += term;
            if term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) {
                break;
            }
        }
        sum
    }

    /// sin and cos of `|x| <= π/4` radians.
    fn sin_cos_reduced(x: Self) -> (Self, Self) {
        let x2 = x.sqr();
        let mut s = x;
        let mut c = Self::ONE;
        let mut ts = x;
        let mut tc = Self::ONE;
        for k in 1..=15u32 {
            let a = (2 * k) as f64;
            tc = -tc * x2 / Self::from_f64((a - 1.0) * a);
            ts = -ts * x2 / Self::from_f64(a * (a + 1.0));
            c += tc;
            s += ts;
            if ts.hi.abs() < 1e-34 && tc.hi.abs() < 1e-34 {
                break;
            }
        }
        (s, c)
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (h, l) = quick_two_sum(s, e + f);
        Self { hi: h, lo: l }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (h, l) = quick_two_sum(p, e);
        Self { hi: h, lo: l }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b * Self::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Self::from_f64(q2);
        let q3 = r.hi / b.hi;
        let (h, l) = quick_two_sum(q1, q2);
        Self { hi: h, lo: l } + Self::from_f64(q3)
    }
}

impl Rem for DoubleDouble {
    type Output = Self;
    fn rem(self, b: Self) -> Self {
        self - b * (self / b).trunc()
    }
}

macro_rules! forward_assign {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for DoubleDouble {
            #[inline]
            fn $m(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    };
}
forward_assign!(AddAssign, add_assign, +);
forward_assign!(SubAssign, sub_assign, -);
forward_assign!(MulAssign, mul_assign, *);
forward_assign!(DivAssign, div_assign, /);
forward_assign!(RemAssign, rem_assign, %);

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        Self::ZERO
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        Self::ONE
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid double-double literal")]
pub struct ParseDdError;

impl FromStr for DoubleDouble {
    type Err = ParseDdError;

    /// Decimal literal with optional sign, fraction and exponent, rounded
    /// to double-double (not just to the nearest `f64`).
    fn from_str(s: &str) -> Result<Self, ParseDdError> {
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (mant, exp) = match body.find(['e', 'E']) {
            Some(i) => (
                &body[..i],
                body[i + 1..].parse::<i32>().map_err(|_| ParseDdError)?,
            ),
            None => (body, 0),
        };
        let mut v = Self::ZERO;
        let mut scale = 0i32;
        let mut seen_dot = false;
        let mut digits = 0usize;
        for ch in mant.chars() {
            match ch {
                '.' if !seen_dot => seen_dot = true,
                '0'..='9' => {
                    v = v * Self::from_f64(10.0) + Self::from_f64(f64::from(ch as u8 - b'0'));
                    digits += 1;
                    if seen_dot {
                        scale -= 1;
                    }
                }
                _ => return Err(ParseDdError),
            }
        }
        if digits == 0 {
            return Err(ParseDdError);
        }
        let e = exp + scale;
        let ten = Self::from_f64(10.0);
        if e > 0 {
            v *= ten.powi(e);
        } else if e < 0 {
            v /= ten.powi(-e);
        }
        Ok(if neg { -v } else { v })
    }
}

impl Num for DoubleDouble {
    type FromStrRadixErr = ParseDdError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, ParseDdError> {
        if radix != 10 {
            return Err(ParseDdError);
        }
        s.parse()
    }
}

impl FromPrimitive for DoubleDouble {
    fn from_i64(n: i64) -> Option<Self> {
        Some(Self::from_i128(n as i128))
    }
    fn from_u64(n: u64) -> Option<Self> {
        Some(Self::from_i128(n as i128))
    }
    fn from_f64(x: f64) -> Option<Self> {
        Some(Self::from_f64(x))
    }
}

impl ToPrimitive for DoubleDouble {
    fn to_i64(&self) -> Option<i64> {
        let t = self.trunc();
        if !t.hi.is_finite() || t.hi.abs() > 9.2e18 {
            return None;
        }
        Some((t.hi as i128 + t.lo as i128) as i64)
    }
    fn to_u64(&self) -> Option<u64> {
        let t = self.trunc();
        if !t.hi.is_finite() || t.hi < 0.0 || t.hi > 1.8e19 {
            return None;
        }
        Some((t.hi as i128 + t.lo as i128) as u64)
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.hi + self.lo)
    }
}

impl fmt::Display for DoubleDouble {
    /// Scientific notation with 32 significant digits by default.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(31) + 1;
        match self.hi.classify() {
            FpCategory::Nan | FpCategory::Infinite => return write!(f, "{}", self.hi),
            FpCategory::Zero => return write!(f, "0"),
            _ => {}
        }
        let mut x = Real::abs(*self);
        let mut e = self.hi.abs().log10().floor() as i32;
        let ten = Self::from_f64(10.0);
        x = if e >= 0 { x / ten.powi(e) } else { x * ten.powi(-e) };
        if x.hi >= 10.0 {
            x /= ten;
            e += 1;
        } else if x.hi < 1.0 {
            x *= ten;
            e -= 1;
        }
        let mut ds = Vec::with_capacity(digits + 1);
        for _ in 0..=digits {
            let d = Real::floor(x).hi.clamp(0.0, 9.0);
            ds.push(d as u8);
            x = (x - Self::from_f64(d)) * ten;
        }
        // round half up on the guard digit, propagating carries
        if ds[digits] >= 5 {
            let mut i = digits;
            loop {
                if i == 0 {
                    ds.insert(0, 1);
                    e += 1;
                    break;
                }
                i -= 1;
                if ds[i] == 9 {
                    ds[i] = 0;
                } else {
                    ds[i] += 1;
                    break;
                }
            }
        }
        ds.truncate(digits);
        let mut out = String::with_capacity(digits + 8);
        if self.hi < 0.0 {
            out.push('-');
        }
        out.push((b'0' + ds[0]) as char);
        if digits > 1 {
            out.push('.');
            for d in &ds[1..] {
                out.push((b'0' + d) as char);
            }
        }
        write!(f, "{out}e{e}")
    }
}

impl Real for DoubleDouble {
    const NAME: &'static str = "dd";

    fn epsilon() -> Self {
        Self::EPSILON
    }
    fn pi() -> Self {
        PI
    }
    fn tau() -> Self {
        TAU
    }
    fn of(x: f64) -> Self {
        Self::from_f64(x)
    }
    fn as_f64(self) -> f64 {
        self.hi + self.lo
    }
    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
    fn floor(self) -> Self {
        let h = self.hi.floor();
        if h == self.hi {
            let (a, b) = quick_two_sum(h, self.lo.floor());
            Self { hi: a, lo: b }
        } else {
            Self { hi: h, lo: 0.0 }
        }
    }
    fn round(self) -> Self {
        Real::floor(self + Self::from_f64(0.5))
    }
    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return if self.hi == 0.0 {
                Self::ZERO
            } else {
                Self::from_f64(f64::NAN)
            };
        }
        let y = self.hi.sqrt();
        let (p, e) = two_prod(y, y);
        let r = self - Self { hi: p, lo: e };
        Self::from_f64(y) + Self::from_f64(r.hi * (0.5 / y))
    }
    fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Self::from_f64(k)).ldexp(-10);
        let mut s = Self::expm1_small(r);
        // (1+s)^2 - 1 = 2s + s^2, keeps the small quantity accurate
        for _ in 0..10 {
            s = s.ldexp(1) + s.sqr();
        }
        (s + Self::ONE).ldexp(k as i32)
    }
    fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Self::from_f64(if self.hi == 0.0 { f64::NEG_INFINITY } else { f64::NAN });
        }
        let x = Self::from_f64(self.hi.ln());
        x + self * Real::exp(-x) - Self::ONE
    }
    fn atan(self) -> Self {
        let y0 = Self::from_f64(self.hi.atan());
        let (s, c) = Real::sin_cos_turns(y0 / TAU);
        y0 - (s - self * c) / (c + self * s)
    }
    fn sin_cos_turns(self) -> (Self, Self) {
        let r = self - Real::round(self);
        let y = r.ldexp(2);
        let j = Real::round(y);
        let t = (y - j).ldexp(-2) * TAU;
        let (s, c) = Self::sin_cos_reduced(t);
        match (j.hi as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
    fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    type Dd = DoubleDouble;

    /// Exact rational value of a double-double.
    fn exact(x: Dd) -> BigRational {
        BigRational::from_float(x.hi).unwrap() + BigRational::from_float(x.lo).unwrap()
    }

    fn rel_err(x: Dd, want: &BigRational) -> f64 {
        let d = exact(x) - want;
        (d / want).to_f64().unwrap().abs()
    }


    #[test]
    fn arithmetic_matches_exact_rationals() {
        let a = Dd::new(1.0, 1e-20);
        let b = Dd::ratio(1, 3);
        let third = BigRational::new(BigInt::from(1), BigInt::from(3));
        assert!(rel_err(b, &third) < 2.0 * Dd::EPSILON.hi);
        let s = a + b;
        assert!(rel_err(s, &(exact(a) + exact(b))) < 2.0 * Dd::EPSILON.hi);
        let p = a * b;
        assert!(rel_err(p, &(exact(a) * exact(b))) < 4.0 * Dd::EPSILON.hi);
        let q = a / b;
        assert!(rel_err(q, &(exact(a) / exact(b))) < 4.0 * Dd::EPSILON.hi);
    }

    #[test]
    fn sqrt_two_squared() {
        let r = Real::sqrt(Dd::from_f64(2.0));
        let back = r * r - Dd::from_f64(2.0);
        assert!(back.hi.abs() < 1e-30);
    }

    #[test]
    fn exp_ln_roundtrip_and_constants() {
        let one = Real::exp(Dd::ONE);
        assert!((one - E).hi.abs() < 1e-31);
        let l = Real::ln(Dd::from_f64(2.0));
        assert!((l - LN2).hi.abs() < 1e-31);
        for x in [0.1, 1.7, -3.3, 25.0] {
            let x = Dd::from_f64(x);
            let y = Real::ln(Real::exp(x));
            assert!((y - x).hi.abs() < 1e-30 * x.hi.abs().max(1.0));
        }
    }

    #[test]
    fn trig_identities() {
        for t in [0.0, 0.01, 0.125, 0.3, 0.49, -0.77, 12.6] {
            let (s, c) = Real::sin_cos_turns(Dd::from_f64(t));
            let one = s * s + c * c - Dd::ONE;
            assert!(one.hi.abs() < 1e-30, "t={t}");
            let (s64, c64) = (t * std::f64::consts::TAU).sin_cos();
            assert!((s.hi - s64).abs() < 1e-13 && (c.hi - c64).abs() < 1e-13);
        }
        let (s, _) = Real::sin_cos_turns(Dd::ratio(1, 12));
        assert!((s - Dd::from_f64(0.5)).hi.abs() < 1e-31);
    }

    #[test]
    fn atan_inverts_tan() {
        let four_atan_one = Real::atan(Dd::ONE).ldexp(2);
        assert!((four_atan_one - PI).hi.abs() < 1e-31);
        let x = Dd::ratio(1, 7);
        let y = Real::atan(x);
        let (s, c) = Real::sin_cos_turns(y / TAU);
        assert!((s / c - x).hi.abs() < 1e-31);
    }

    #[test]
    fn parse_and_display() {
        let x: Dd = "0.3".parse().unwrap();
        assert!((x - Dd::ratio(3, 10)).hi.abs() < 1e-32);
        let y: Dd = "-1.25e-3".parse().unwrap();
        assert_eq!(y.hi, -1.25e-3);
        assert_eq!(format!("{:.5}", Dd::ratio(1, 3)), "3.33333e-1");
        assert_eq!(format!("{}", Dd::ONE), "1.0000000000000000000000000000000e0");
        assert!("abc".parse::<Dd>().is_err());
    }

    #[test]
    fn floor_round_with_low_word() {
        let x = Dd::new(3.0, -1e-20);
        assert_eq!(Real::floor(x), Dd::from_f64(2.0));
        assert_eq!(Real::round(x), Dd::from_f64(3.0));
        assert_eq!(Real::floor(Dd::from_f64(-0.5)), Dd::from_f64(-1.0));
        assert_eq!(Dd::from_f64(7.9).to_i64(), Some(7));
    }
}
