//! Continued fractions of rotation numbers in `(0, 1)`.
//!
//! `θ = [a_0, a_1, ...] = 1/(a_0 + 1/(a_1 + ...))`. Convergents are indexed
//! so that `p_0/q_0 = 0/1` and `p_{n+1} = a_n p_n + p_{n-1}`, likewise for `q`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Why an expansion stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// All requested quotients were produced.
    Complete,
    /// A remainder was an integer to working precision.
    Rational,
    /// The propagated remainder error grew past the usable floor.
    PrecisionExhausted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContinuedFraction {
    quotients: Vec<u64>,
    termination: Termination,
}

impl ContinuedFraction {
    pub fn new(quotients: Vec<u64>) -> Result<Self> {
        if quotients.is_empty() {
            return Err(Error::InvalidArgument("continued fraction needs depth >= 1".into()));
        }
        if quotients.contains(&0) {
            return Err(Error::InvalidArgument("partial quotients must be >= 1".into()));
        }
        Ok(Self {
            quotients,
            termination: Termination::Complete,
        })
    }

    pub fn quotients(&self) -> &[u64] {
        &self.quotients
    }

    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    /// Value of the finite fraction in exact arithmetic.
    pub fn to_rational(&self) -> BigRational {
        let mut x = BigRational::zero();
        for &a in self.quotients.iter().rev() {
            x = (BigRational::from_integer(BigInt::from(a)) + x).recip();
        }
        x
    }
}

/// Partial quotients of `theta` by the Gauss map, tracking a forward error
/// bound on each remainder.
pub fn expand<T: Real>(theta: T, depth: usize) -> Result<ContinuedFraction> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be >= 1".into()));
    }
    if !(theta > T::zero() && theta < T::one()) {
        return Err(Error::ThetaOutOfRange(theta.as_f64()));
    }
    let eps = T::epsilon();
    let ten = T::of(10.0);
    let mut x = theta;
    let mut err = eps * theta;
    let mut quotients = Vec::with_capacity(depth);
    let mut termination = Termination::Complete;
    while quotients.len() < depth {
        if x < ten * eps {
            termination = Termination::PrecisionExhausted;
            break;
        }
        let y = T::one() / x;
        let err_y = (err / x + eps) * y;
        if err_y > T::of(0.01) {
            termination = Termination::PrecisionExhausted;
            break;
        }
        let near = y.round();
        if (y - near).abs() <= err_y.max(ten * eps * y) {
            quotients.push(near.to_u64().unwrap_or(u64::MAX));
            termination = Termination::Rational;
            break;
        }
        let a = y.floor();
        quotients.push(a.to_u64().unwrap_or(u64::MAX));
        x = y - a;
        err = err_y;
    }
    if quotients.is_empty() {
        return Err(Error::PrecisionExhausted(
            "no partial quotient could be resolved".into(),
        ));
    }
    Ok(ContinuedFraction {
        quotients,
        termination,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Convergent {
    pub n: usize,
    pub p: u64,
    pub q: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Convergents {
    pub items: Vec<Convergent>,
    /// Set when `q_n` or `p_n` would overflow 64 bits; `items` stops before it.
    pub truncated: bool,
    /// Carried over from the expansion, so rational inputs stay visible.
    pub source: Termination,
}

impl Convergents {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn q(&self, n: usize) -> u64 {
        self.items[n].q
    }

    pub fn p(&self, n: usize) -> u64 {
        self.items[n].p
    }
}

/// `(p_n, q_n)` for `0 <= n <= depth`.
pub fn convergents(cf: &ContinuedFraction) -> Convergents {
    let mut items = Vec::with_capacity(cf.depth() + 1);
    items.push(Convergent { n: 0, p: 0, q: 1 });
    let (mut p_prev, mut q_prev) = (1u64, 0u64);
    let (mut p, mut q) = (0u64, 1u64);
    let mut truncated = false;
    for (i, &a) in cf.quotients.iter().enumerate() {
        let next = a
            .checked_mul(p)
            .and_then(|v| v.checked_add(p_prev))
            .zip(a.checked_mul(q).and_then(|v| v.checked_add(q_prev)));
        let Some((pn, qn)) = next else {
            truncated = true;
            break;
        };
        p_prev = p;
        q_prev = q;
        p = pn;
        q = qn;
        items.push(Convergent { n: i + 1, p, q });
    }
    Convergents {
        items,
        truncated,
        source: cf.termination,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub n: usize,
    pub q: u64,
    pub q_next: u64,
    /// `|θ - p_n/q_n|`.
    pub error: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// `error/lower - 1`, positive when the strict lower bound holds.
    pub lower_margin: f64,
    /// `1 - error/upper`, nonnegative when the upper bound holds.
    pub upper_margin: f64,
    /// False when `q_n q_{n+1}` exceeds what the working precision resolves.
    pub resolvable: bool,
}

impl BoundCheck {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Evaluates the two-sided convergent inequality at every index that has a
/// successor convergent.
pub fn check_convergent_bounds<T: Real>(theta: T, conv: &Convergents) -> Result<Vec<BoundCheck>> {
    if conv.source == Termination::Rational {
        let last = conv.items.last().expect("nonempty");
        return Err(Error::RationalInput {
            p: last.p,
            q: last.q,
        });
    }
    if conv.len() < 2 {
        return Err(Error::InvalidArgument("need at least two convergents".into()));
    }
    let eps = T::epsilon();
    let mut out = Vec::with_capacity(conv.len() - 1);
    for w in conv.items.windows(2) {
        let (c, next) = (w[0], w[1]);
        let q = T::from_u64_exact(c.q);
        let q1 = T::from_u64_exact(next.q);
        let dist = (q * theta - T::from_u64_exact(c.p)).abs();
        let resolvable = (q * q1 * eps).as_f64() <= 1e-3;
        if dist.is_zero() {
            if resolvable {
                return Err(Error::RationalInput { p: c.p, q: c.q });
            }
            // below the working precision; nothing more to check
            break;
        }
        let error = dist / q;
        let lower = T::one() / (q * (q + q1));
        let upper = T::one() / (q * q1);
        out.push(BoundCheck {
            n: c.n,
            q: c.q,
            q_next: next.q,
            error: error.as_f64(),
            lower: lower.as_f64(),
            upper: upper.as_f64(),
            lower_ok: error > lower,
            upper_ok: error <= upper,
            lower_margin: (error / lower - T::one()).as_f64(),
            upper_margin: (T::one() - error / upper).as_f64(),
            resolvable,
        });
    }
    Ok(out)
}

/// Exact Euclidean expansion of a rational in `(0, 1)`.
pub fn expand_rational(x: &BigRational) -> Vec<u64> {
    let mut out = Vec::new();
    let (mut n, mut d) = (x.numer().clone(), x.denom().clone());
    while !n.is_zero() {
        let (a, r) = d.div_rem(&n);
        out.push(a.to_u64().unwrap_or(u64::MAX));
        d = n;
        n = r;
    }
    out
}

/// A rotation number together with the data every measure computation
/// needs: its partial quotients and the Gauss-map remainders
/// `x_k = [a_k, a_{k+1}, ...]`.
///
/// Since `|q_n θ - p_n| = x_0 x_1 ... x_n`, keeping accurate remainders gives
/// atom weights to full relative precision at every level.
#[derive(Clone, Debug)]
pub struct RotationNumber<T> {
    value: T,
    cf: ContinuedFraction,
    conv: Convergents,
    tails: Vec<T>,
}

/// Tails are evaluated backward from this many quotients past the last
/// requested one; the truncation error contracts by at least `1/4` every two
/// steps.
const TAIL_SLACK: usize = 60;

impl<T: Real> RotationNumber<T> {
    /// `[a, a, a, ...]`, the positive root of `x^2 + a x - 1`.
    pub fn bounded_type(a: u64, depth: usize) -> Self {
        assert!(a >= 1);
        let at = T::from_u64_exact(a);
        let x = ((at * at + T::of(4.0)).sqrt() - at) / T::of(2.0);
        let cf = ContinuedFraction::new(vec![a; depth.max(1)]).expect("valid quotients");
        let conv = convergents(&cf);
        let tails = vec![x; cf.depth()];
        Self {
            value: x,
            cf,
            conv,
            tails,
        }
    }

    pub fn golden(depth: usize) -> Self {
        Self::bounded_type(1, depth)
    }

    pub fn silver(depth: usize) -> Self {
        Self::bounded_type(2, depth)
    }

    /// An irrational specified by its quotients. The value is the infinite
    /// fraction with the supplied sequence, truncated far enough out that the
    /// first `depth` tails are accurate.
    pub fn from_quotient_fn(depth: usize, a: impl Fn(usize) -> u64) -> Self {
        let total = depth + TAIL_SLACK;
        let all: Vec<u64> = (0..total).map(&a).collect();
        let mut tails = vec![T::zero(); total];
        let mut x = T::zero();
        for k in (0..total).rev() {
            x = T::one() / (T::from_u64_exact(all[k]) + x);
            tails[k] = x;
        }
        tails.truncate(depth);
        let cf = ContinuedFraction::new(all[..depth].to_vec()).expect("valid quotients");
        let conv = convergents(&cf);
        Self {
            value: tails[0],
            cf,
            conv,
            tails,
        }
    }

    /// Expands a numerical value. Tails come from the forward Gauss map, so
    /// their accuracy degrades with depth; prefer the structured
    /// constructors when the quotients are known.
    pub fn from_value(theta: T, depth: usize) -> Result<Self> {
        let cf = expand(theta, depth)?;
        if cf.termination == Termination::Rational {
            let conv = convergents(&cf);
            let last = conv.items.last().expect("nonempty");
            return Err(Error::RationalInput {
                p: last.p,
                q: last.q,
            });
        }
        let mut tails = Vec::with_capacity(cf.depth());
        let mut x = theta;
        for &a in cf.quotients() {
            tails.push(x);
            x = T::one() / x - T::from_u64_exact(a);
        }
        let conv = convergents(&cf);
        Ok(Self {
            value: theta,
            cf,
            conv,
            tails,
        })
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn continued_fraction(&self) -> &ContinuedFraction {
        &self.cf
    }

    pub fn convergents(&self) -> &Convergents {
        &self.conv
    }

    pub fn quotient(&self, n: usize) -> u64 {
        self.cf.quotients[n]
    }

    pub fn q(&self, n: usize) -> u64 {
        self.conv.q(n)
    }

    pub fn p(&self, n: usize) -> u64 {
        self.conv.p(n)
    }

    /// Highest `n` for which `q_n` is known.
    pub fn max_level(&self) -> usize {
        self.conv.len() - 1
    }

    /// `|q_n θ - p_n|`, the measure of `I_n`.
    pub fn distance(&self, n: usize) -> T {
        let mut w = T::one();
        for &x in &self.tails[..=n] {
            w *= x;
        }
        w
    }

    pub fn distances(&self, upto: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(upto + 1);
        let mut w = T::one();
        for &x in &self.tails[..=upto] {
            w *= x;
            out.push(w);
        }
        out
    }

    /// Sign of `θ - p_n/q_n`.
    pub fn sign_of_offset(n: usize) -> i32 {
        if n.is_multiple_of(2) {
            1
        } else {
            -1
        }
    }
}

/// Reconstructs `p_n/q_n` from the first `n` quotients.
pub fn convergent_rational(c: &Convergent) -> BigRational {
    BigRational::new(BigInt::from(c.p), BigInt::from(c.q))
}

pub fn fib(n: usize) -> u64 {
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 0..n {
        let t = a + b;
        a = b;
        b = t;
    }
    a
}

pub fn is_coprime(p: u64, q: u64) -> bool {
    p.gcd(&q).is_one()
}
