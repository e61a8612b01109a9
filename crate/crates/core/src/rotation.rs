//! Rotation numbers with certified brackets, closest returns, and tuning of
//! `ω` so that `ρ(f_ω)` matches a target.
//!
//! Certification rests on one fact about monotone degree-one lifts: if
//! `F^q(y) >= y + p` at a single point `y` then `ρ >= p/q`, and symmetrically
//! for `<=`.

use serde::Serialize;

use crate::circle_maps::{lift_iterate, CircleMap, LiftPoint};
use crate::contfrac::RotationNumber;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    LiftAverage,
    /// Snapped to a rational certified by a sign change of `F^q(x) - x - p`.
    CertifiedRational,
    ClosestReturn,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RotationEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: Method,
    pub iterates: u64,
    /// Half-width of `[lower, upper]`.
    pub error_bound: f64,
    /// Set when `method` is `CertifiedRational`.
    pub rational: Option<(u64, u64)>,
}

impl RotationEstimate {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// `(F^N(x0) - x0)/N` with the bracket `±1/N` that holds for any monotone
/// lift. With `accelerate`, the simplest rational inside the bracket is
/// tested and, if certified, returned exactly.
pub fn estimate_rho<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    x0: T,
    n: u64,
    accelerate: bool,
) -> RotationEstimate {
    assert!(n >= 1, "need at least one iterate");
    let end = lift_iterate(map, x0, n);
    let disp = end.offset(x0, 0);
    let nt = T::from_u64_exact(n);
    let value = (disp / nt).as_f64();
    if map.is_rigid() {
        return RotationEstimate {
            value,
            lower: value,
            upper: value,
            method: Method::LiftAverage,
            iterates: n,
            error_bound: 0.0,
            rational: None,
        };
    }
    let lower = ((disp - T::one()) / nt).as_f64();
    let upper = ((disp + T::one()) / nt).as_f64();
    let mut est = RotationEstimate {
        value,
        lower,
        upper,
        method: Method::LiftAverage,
        iterates: n,
        error_bound: 1.0 / n as f64,
        rational: None,
    };
    if accelerate {
        if let Some((p, q)) = simplest_rational_in(lower, upper, n) {
            if certify_rational(map, p, q, 64) {
                let r = p as f64 / q as f64;
                est = RotationEstimate {
                    value: r,
                    lower: r,
                    upper: r,
                    method: Method::CertifiedRational,
                    iterates: n,
                    error_bound: 0.0,
                    rational: Some((p, q)),
                };
            }
        }
    }
    est
}

/// Smallest-denominator fraction in `[lo, hi]` (Stern-Brocot descent),
/// restricted to denominators `<= q_max`.
pub fn simplest_rational_in(lo: f64, hi: f64, q_max: u64) -> Option<(u64, u64)> {
    if hi < lo || hi < 0.0 {
        return None;
    }
    if lo <= 0.0 {
        return Some((0, 1));
    }
    let (mut a, mut b) = ((0u64, 1u64), (1u64, 0u64));
    loop {
        let m = (a.0 + b.0, a.1 + b.1);
        if m.1 > q_max {
            return None;
        }
        let v = m.0 as f64 / m.1 as f64;
        if v < lo {
            a = m;
        } else if v > hi {
            b = m;
        } else {
            return Some(m);
        }
    }
}

/// `ρ = p/q` is certain when `F^q(x) - x - p` takes both signs (or zero)
/// on a grid.
pub fn certify_rational<T: Real, M: CircleMap<T> + ?Sized>(map: &M, p: u64, q: u64, grid: usize) -> bool {
    let mut saw_nonneg = false;
    let mut saw_nonpos = false;
    for k in 0..grid {
        let x = T::of(k as f64 / grid as f64);
        let d = lift_iterate(map, x, q).offset(x, p as i64);
        saw_nonneg |= d >= T::zero();
        saw_nonpos |= d <= T::zero();
        if saw_nonneg && saw_nonpos {
            return true;
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosestReturns {
    pub times: Vec<u64>,
    /// Side of `f^t(c)` relative to `c`: `+1` ahead, `-1` behind.
    pub signs: Vec<i8>,
    pub distances: Vec<f64>,
    pub rational_suspected: bool,
}

impl ClosestReturns {
    pub fn sides_alternate(&self) -> bool {
        self.signs.windows(2).all(|w| w[0] == -w[1])
    }

    /// Partial quotients implied by the return times, using
    /// `a_n = (q_{n+1} - q_{n-1})/q_n`. When the first return lands behind
    /// `c` the rotation number exceeds one half, the first time is `q_1`,
    /// and `q_0 = 1` is restored in front.
    pub fn quotients(&self) -> Vec<u64> {
        let mut q: Vec<u64> = Vec::with_capacity(self.times.len() + 2);
        q.push(0);
        if self.signs.first() == Some(&-1) {
            q.push(1);
        }
        q.extend_from_slice(&self.times);
        q.windows(3)
            .map(|w| {
                let (prev, cur, next) = (w[0], w[1], w[2]);
                (next - prev) / cur
            })
            .collect()
    }
}

/// Record times of `min_j d(f^j(c), c)` for `1 <= j <= max_time`.
pub fn detect_closest_returns<T: Real, M: CircleMap<T> + ?Sized>(map: &M, c: T, max_time: u64) -> ClosestReturns {
    let mut out = ClosestReturns {
        times: Vec::new(),
        signs: Vec::new(),
        distances: Vec::new(),
        rational_suspected: false,
    };
    let floor = T::of(16.0) * T::epsilon();
    let mut best = T::of(2.0);
    let mut p = LiftPoint::new(c);
    for j in 1..=max_time {
        p.advance(map);
        let d = p.frac.circle_diff(c);
        let ad = d.abs();
        if ad < best {
            best = ad;
            out.times.push(j);
            out.signs.push(if d >= T::zero() { 1 } else { -1 });
            out.distances.push(ad.as_f64());
            if ad <= floor * T::from_u64_exact(j) {
                out.rational_suspected = true;
                break;
            }
        }
    }
    out
}

/// Outcome of comparing the orbit of `c` with the convergents of `θ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `ρ < θ`, decided at this level.
    Below(usize),
    /// `ρ > θ`, decided at this level.
    Above(usize),
    /// `ρ` lies between `p_{N-1}/q_{N-1}` and `p_N/q_N` for this `N`.
    Inside(usize),
}

/// Walks levels `0..=n_max`: `θ - p_n/q_n` has sign `(-1)^n`, and the sign
/// of `D_n = F^{q_n}(c) - c - p_n` certifies on which side of `p_n/q_n` the
/// rotation number lies.
pub fn compare_with_theta<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    c: T,
    theta: &RotationNumber<T>,
    n_max: usize,
) -> Comparison {
    let n_max = n_max.min(theta.max_level());
    let mut p = LiftPoint::new(c);
    let mut t = 0u64;
    for n in 0..=n_max {
        let qn = theta.q(n);
        while t < qn {
            p.advance(map);
            t += 1;
        }
        let d = p.offset(c, theta.p(n) as i64);
        let noise = T::of(64.0) * T::epsilon() * T::from_u64_exact(qn);
        let want_positive = n % 2 == 0;
        // an offset within rounding noise is read as a periodic orbit,
        // i.e. ρ = p_n/q_n, which lies on the far side of θ
        let resolved = map.is_rigid() || d.abs() > noise;
        let agrees = resolved && (if want_positive { d > T::zero() } else { d < T::zero() });
        if !agrees {
            return if want_positive {
                Comparison::Below(n)
            } else {
                Comparison::Above(n)
            };
        }
    }
    Comparison::Inside(n_max)
}

/// Largest level `N` such that the orbit of `c` has the combinatorics of
/// `θ` through `N`; `None` when not even level 1 agrees.
pub fn certified_level<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    c: T,
    theta: &RotationNumber<T>,
    n_max: usize,
) -> Option<usize> {
    match compare_with_theta(map, c, theta, n_max) {
        Comparison::Inside(n) => Some(n),
        Comparison::Below(n) | Comparison::Above(n) => n.checked_sub(1).filter(|&k| k >= 1),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tuned<T> {
    #[serde(skip)]
    pub omega: T,
    pub omega_f64: f64,
    /// `ρ` is certified between `p_{N-1}/q_{N-1}` and `p_N/q_N`.
    pub level: usize,
    pub rho_lower: f64,
    pub rho_upper: f64,
    pub steps: u32,
}

impl<T: Real> Tuned<T> {
    pub fn bracket_width(&self) -> f64 {
        self.rho_upper - self.rho_lower
    }
}

pub const MAX_BISECTION_STEPS: u32 = 64;

/// Level whose cylinder width `1/(q_N q_{N-1})` is at most `tol`.
pub fn level_for_tolerance<T: Real>(theta: &RotationNumber<T>, tol: f64) -> Result<usize> {
    (2..=theta.max_level())
        .find(|&n| 1.0 / (theta.q(n) as f64 * theta.q(n - 1) as f64) <= tol)
        .ok_or_else(|| Error::InvalidArgument(format!("rotation number too shallow for tol {tol:e}")))
}

fn certified_bracket<T: Real>(theta: &RotationNumber<T>, n: usize) -> (f64, f64) {
    let a = theta.p(n) as f64 / theta.q(n) as f64;
    let b = theta.p(n - 1) as f64 / theta.q(n - 1) as f64;
    (a.min(b), a.max(b))
}

/// Bisection on `ω` until `ρ(f_ω)` is certified inside the level-`N`
/// cylinder of `θ`, where `N` is chosen from `tol`. The built-in families
/// satisfy `ρ(f_0) = 0` and `ρ(f_1) = 1`, so `[0, 1]` is the default
/// bracket. Passing the previous answer's neighborhood re-tunes without
/// moving it.
pub fn tune_parameter<T, M, F>(make: F, theta: &RotationNumber<T>, tol: f64, bracket: Option<(T, T)>) -> Result<Tuned<T>>
where
    T: Real,
    M: CircleMap<T>,
    F: Fn(T) -> Result<M>,
{
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let level = level_for_tolerance(theta, tol)?;
    let (rho_lower, rho_upper) = certified_bracket(theta, level);
    let base = |m: &M| m.critical_points().first().map(|c| c.c).unwrap_or_else(T::zero);
    let probe = make(theta.value())?;
    if probe.is_rigid() {
        return Ok(Tuned {
            omega: theta.value(),
            omega_f64: theta.value().as_f64(),
            level,
            rho_lower,
            rho_upper,
            steps: 0,
        });
    }
    let classify = |w: T| -> Result<Comparison> {
        let m = make(w)?;
        Ok(compare_with_theta(&m, base(&m), theta, level))
    };
    let (mut lo, mut hi) = bracket.unwrap_or((T::zero(), T::one()));
    if let Some((l, h)) = bracket {
        if l.partial_cmp(&h) != Some(std::cmp::Ordering::Less) {
            return Err(Error::InvalidArgument("empty tuning bracket".into()));
        }
        let mid = (l + h) * T::half();
        if let Comparison::Inside(_) = classify(mid)? {
            return Ok(Tuned {
                omega: mid,
                omega_f64: mid.as_f64(),
                level,
                rho_lower,
                rho_upper,
                steps: 1,
            });
        }
        if !matches!(classify(l)?, Comparison::Below(_)) || !matches!(classify(h)?, Comparison::Above(_)) {
            return Err(Error::InvalidArgument("tuning bracket does not straddle the target".into()));
        }
    }
    let mut last_level = 0usize;
    for step in 1..=MAX_BISECTION_STEPS {
        let mid = (lo + hi) * T::half();
        if !(mid > lo && mid < hi) {
            return Err(Error::ModeLocking {
                p: theta.p(last_level),
                q: theta.q(last_level),
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        match classify(mid)? {
            Comparison::Inside(_) => {
                return Ok(Tuned {
                    omega: mid,
                    omega_f64: mid.as_f64(),
                    level,
                    rho_lower,
                    rho_upper,
                    steps: step,
                })
            }
            Comparison::Below(n) => {
                lo = mid;
                last_level = n;
            }
            Comparison::Above(n) => {
                hi = mid;
                last_level = n;
            }
        }
    }
    Err(Error::TuningStalled {
        steps: MAX_BISECTION_STEPS,
    })
}
