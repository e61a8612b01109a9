//! Critical circle maps given by degree-one lifts.
//!
//! Every built-in family has a closed-form derivative that vanishes exactly
//! at the declared critical points and is positive elsewhere. A nonnegative
//! derivative forces critical points of odd type; even-type (fold) critical
//! points would break injectivity and are not representable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sum::{Neumaier, StreamingPairwise};

/// Two-sided power law `A|x-c|^{d-1} <= Df(x) <= B|x-c|^{d-1}` on `|x-c| <= radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLaw {
    pub a: f64,
    pub b: f64,
    pub radius: f64,
}

impl PowerLaw {
    /// Constant `C0` with `|log Df(x)| <= C0 log(1/|x-c|)` on the validity
    /// neighborhood. Needs `B r^{d-1} <= 1` so that `log Df <= 0` there.
    pub fn log_constant(&self, d: f64) -> Option<f64> {
        if self.b * self.radius.powf(d - 1.0) > 1.0 {
            return None;
        }
        Some((d - 1.0) + (-self.a.ln()).max(0.0) / (1.0 / self.radius).ln())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalPoint<T> {
    pub c: T,
    pub d: f64,
    pub power_law: PowerLaw,
}

/// Contract consumed by every orbit-based module.
pub trait CircleMap<T: Real>: Sync {
    /// Degree-one lift `F(x + 1) = F(x) + 1`.
    fn lift(&self, x: T) -> T;
    fn deriv(&self, x: T) -> T;
    fn deriv2(&self, x: T) -> T;
    fn critical_points(&self) -> &[CriticalPoint<T>];

    /// True when `Df` is identically one.
    fn is_rigid(&self) -> bool {
        false
    }

    /// `f(x)` reduced to `[0, 1)`.
    fn apply(&self, x: T) -> T {
        self.lift(x).fract_pos()
    }
}

/// Built-in families, each parametrized by `ω` (and `c2` when bicritical).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Family {
    Rigid,
    Arnold,
    Bicritical { c2: f64 },
    Blaschke,
}

impl Family {
    pub fn build<T: Real>(&self, omega: T) -> Result<CircleMapModel<T>> {
        match *self {
            Family::Rigid => Ok(CircleMapModel::rigid(omega)),
            Family::Arnold => Ok(CircleMapModel::arnold_critical(omega)),
            Family::Bicritical { c2 } => CircleMapModel::bicritical_trig(omega, T::of(c2)),
            Family::Blaschke => Ok(CircleMapModel::blaschke_circle(omega)),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Family::Rigid => "rigid",
            Family::Arnold => "arnold",
            Family::Bicritical { .. } => "bicritical",
            Family::Blaschke => "blaschke",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind<T> {
    Rigid,
    Arnold,
    Bicritical { c2: T, z: T, sin_beta: T },
    Blaschke,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircleMapModel<T> {
    kind: Kind<T>,
    omega: T,
    critical: Vec<CriticalPoint<T>>,
}

const POWER_LAW_RADIUS: f64 = 0.1;

impl<T: Real> CircleMapModel<T> {
    pub fn rigid(omega: T) -> Self {
        Self {
            kind: Kind::Rigid,
            omega,
            critical: Vec::new(),
        }
    }

    /// `F(x) = x + ω - sin(2πx)/(2π)`, cubic critical point at 0.
    pub fn arnold_critical(omega: T) -> Self {
        let mut m = Self {
            kind: Kind::Arnold,
            omega,
            critical: Vec::new(),
        };
        m.declare_critical(&[T::zero()], 3.0);
        m
    }

    /// Derivative `(1 - cos 2πx)(1 - cos 2π(x - c2))/Z`, integrated in closed
    /// form; critical points at 0 and `c2`, both cubic.
    pub fn bicritical_trig(omega: T, c2: T) -> Result<Self> {
        let c2 = c2.fract_pos();
        if c2.is_zero() {
            return Err(Error::InvalidArgument("c2 must differ from 0".into()));
        }
        let (sin_beta, cos_beta) = c2.sin_cos_turns();
        let z = T::one() + cos_beta * T::half();
        if z.as_f64() <= 1e-6 {
            return Err(Error::DegenerateNormalization(z.as_f64()));
        }
        let mut m = Self {
            kind: Kind::Bicritical { c2, z, sin_beta },
            omega,
            critical: Vec::new(),
        };
        m.declare_critical(&[T::zero(), c2], 3.0);
        Ok(m)
    }

    /// Circle restriction of `z ↦ e^{2πiω} z² (z - 3)/(1 - 3z)`:
    /// `F(t) = ω + t - atan(sin 2πt / (3 - cos 2πt))/π`. The argument of the
    /// atan has a positive denominator, so this branch is continuous.
    pub fn blaschke_circle(omega: T) -> Self {
        let mut m = Self {
            kind: Kind::Blaschke,
            omega,
            critical: Vec::new(),
        };
        m.declare_critical(&[T::zero()], 3.0);
        m
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn family(&self) -> Family {
        match self.kind {
            Kind::Rigid => Family::Rigid,
            Kind::Arnold => Family::Arnold,
            Kind::Bicritical { c2, .. } => Family::Bicritical { c2: c2.as_f64() },
            Kind::Blaschke => Family::Blaschke,
        }
    }

    /// Normalization constant of the bicritical family.
    pub fn normalization(&self) -> Option<T> {
        match self.kind {
            Kind::Bicritical { z, .. } => Some(z),
            _ => None,
        }
    }

    fn declare_critical(&mut self, cs: &[T], d: f64) {
        let pts: Vec<CriticalPoint<T>> = cs
            .iter()
            .map(|&c| CriticalPoint {
                c,
                d,
                power_law: measure_power_law(self, c, d, POWER_LAW_RADIUS),
            })
            .collect();
        self.critical = pts;
    }
}

/// Samples `Df(c+h)/|h|^{d-1}` on both sides of `c` and widens the extremes
/// slightly.
pub fn measure_power_law<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    c: T,
    d: f64,
    radius: f64,
) -> PowerLaw {
    let h_min = (100.0 * T::epsilon().as_f64().sqrt()).max(1e-6);
    let mut lo = f64::INFINITY;
    let mut hi = 0f64;
    let steps = 400;
    for k in 0..=steps {
        let frac = k as f64 / steps as f64;
        // geometric in |h| from h_min to radius, plus a linear sweep
        let hs = [
            h_min * (radius / h_min).powf(frac),
            (radius * frac).max(h_min),
        ];
        for h in hs {
            for s in [-1.0, 1.0] {
                let v = map.deriv(c + T::of(s * h)).as_f64() / h.powf(d - 1.0);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    PowerLaw {
        a: lo * (1.0 - 1e-3),
        b: hi * (1.0 + 1e-3),
        radius,
    }
}

impl<T: Real> CircleMap<T> for CircleMapModel<T> {
    #[inline]
    fn lift(&self, x: T) -> T {
        match self.kind {
            Kind::Rigid => x + self.omega,
            Kind::Arnold => {
                let (s, _) = x.sin_cos_turns();
                x + self.omega - s / T::tau()
            }
            Kind::Bicritical { c2, z, sin_beta } => {
                let (s1, _) = x.sin_cos_turns();
                let (s2, _) = (x - c2).sin_cos_turns();
                let (s3, _) = (x + x - c2).sin_cos_turns();
                let tau = T::tau();
                let four = T::of(4.0);
                let bracket = -s1 / tau - (s2 + sin_beta) / tau + (s3 + sin_beta) / (four * tau);
                self.omega + x + bracket / z
            }
            Kind::Blaschke => {
                let (s, c) = x.sin_cos_turns();
                self.omega + x - (s / (T::of(3.0) - c)).atan() / T::pi()
            }
        }
    }

    #[inline]
    fn deriv(&self, x: T) -> T {
        match self.kind {
            Kind::Rigid => T::one(),
            Kind::Arnold => {
                let (_, c) = x.sin_cos_turns();
                T::one() - c
            }
            Kind::Bicritical { c2, z, .. } => {
                let (_, c1) = x.sin_cos_turns();
                let (_, c2v) = (x - c2).sin_cos_turns();
                (T::one() - c1) * (T::one() - c2v) / z
            }
            Kind::Blaschke => {
                let (_, c) = x.sin_cos_turns();
                T::of(6.0) * (T::one() - c) / (T::of(5.0) - T::of(3.0) * c)
            }
        }
    }

    fn deriv2(&self, x: T) -> T {
        match self.kind {
            Kind::Rigid => T::zero(),
            Kind::Arnold => {
                let (s, _) = x.sin_cos_turns();
                T::tau() * s
            }
            Kind::Bicritical { c2, z, .. } => {
                let (s1, c1) = x.sin_cos_turns();
                let (s2, c2v) = (x - c2).sin_cos_turns();
                T::tau() * (s1 * (T::one() - c2v) + (T::one() - c1) * s2) / z
            }
            Kind::Blaschke => {
                let (s, c) = x.sin_cos_turns();
                let den = T::of(5.0) - T::of(3.0) * c;
                T::tau() * T::of(12.0) * s / (den * den)
            }
        }
    }

    fn critical_points(&self) -> &[CriticalPoint<T>] {
        &self.critical
    }

    fn is_rigid(&self) -> bool {
        matches!(self.kind, Kind::Rigid)
    }
}

/// A user-supplied lift. Derivatives come from fourth-order central
/// differences, so they carry roughly `eps^{4/5}` relative error and are
/// unreliable right next to critical points.
pub struct FnCircleMap<T, F> {
    f: F,
    critical: Vec<CriticalPoint<T>>,
    h: T,
}

impl<T: Real, F: Fn(T) -> T + Sync> FnCircleMap<T, F> {
    /// `critical` lists `(location, criticality)` pairs.
    pub fn new(f: F, critical: &[(T, f64)]) -> Self {
        let h = T::of(T::epsilon().as_f64().powf(0.2));
        let mut m = Self {
            f,
            critical: Vec::new(),
            h,
        };
        let pts = critical
            .iter()
            .map(|&(c, d)| CriticalPoint {
                c,
                d,
                power_law: measure_power_law(&m, c, d, POWER_LAW_RADIUS),
            })
            .collect();
        m.critical = pts;
        m
    }
}

/// Fourth-order central difference of `g` at `x` with step `h`.
pub fn central_difference<T: Real>(g: impl Fn(T) -> T, x: T, h: T) -> T {
    let two = T::of(2.0);
    let eight = T::of(8.0);
    (-g(x + two * h) + eight * g(x + h) - eight * g(x - h) + g(x - two * h)) / (T::of(12.0) * h)
}

impl<T: Real, F: Fn(T) -> T + Sync> CircleMap<T> for FnCircleMap<T, F> {
    fn lift(&self, x: T) -> T {
        (self.f)(x)
    }
    fn deriv(&self, x: T) -> T {
        central_difference(&self.f, x, self.h)
    }
    fn deriv2(&self, x: T) -> T {
        let h = self.h;
        ((self.f)(x + h) - T::of(2.0) * (self.f)(x) + (self.f)(x - h)) / (h * h)
    }
    fn critical_points(&self) -> &[CriticalPoint<T>] {
        &self.critical
    }
}

/// Orbit point on the lift, kept as an integer winding plus a fraction so
/// that long orbits do not lose the fractional digits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftPoint<T> {
    pub wind: i64,
    pub frac: T,
}

impl<T: Real> LiftPoint<T> {
    pub fn new(x: T) -> Self {
        let w = x.floor();
        let mut p = Self {
            wind: w.to_i64().unwrap_or(0),
            frac: x - w,
        };
        p.normalize();
        p
    }

    #[inline]
    fn normalize(&mut self) {
        if self.frac >= T::one() || self.frac < T::zero() {
            let w = self.frac.floor();
            self.wind += w.to_i64().unwrap_or(0);
            self.frac -= w;
            if self.frac >= T::one() {
                self.frac -= T::one();
                self.wind += 1;
            }
        }
    }

    #[inline]
    pub fn advance<M: CircleMap<T> + ?Sized>(&mut self, map: &M) {
        self.frac = map.lift(self.frac);
        self.normalize();
    }

    /// `self - x0 - p` evaluated without forming the large lift value.
    pub fn offset(&self, x0: T, p: i64) -> T {
        T::from_i64_exact(self.wind - p) + (self.frac - x0)
    }
}

/// `f^n(x)` reduced mod 1.
pub fn iterate<T: Real, M: CircleMap<T> + ?Sized>(map: &M, x: T, n: u64) -> T {
    let mut p = LiftPoint::new(x);
    for _ in 0..n {
        p.advance(map);
    }
    p.frac
}

/// `F^n(x)` as a lift point.
pub fn lift_iterate<T: Real, M: CircleMap<T> + ?Sized>(map: &M, x: T, n: u64) -> LiftPoint<T> {
    let mut p = LiftPoint::new(x);
    for _ in 0..n {
        p.advance(map);
    }
    p
}

/// True when `x` is a critical point to working precision or `Df(x) <= 0`.
pub fn is_singular<T: Real, M: CircleMap<T> + ?Sized>(map: &M, x: T, df: T) -> bool {
    if df <= T::zero() {
        return true;
    }
    let tol = T::of(4.0) * T::epsilon();
    map.critical_points().iter().any(|c| x.circle_dist(c.c) <= tol)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogSum<T> {
    Finite(T),
    /// `log Df` is `-∞` at the orbit point with this index.
    Singular { step: u64 },
}

impl<T: Real> LogSum<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            LogSum::Finite(v) => Some(v),
            LogSum::Singular { .. } => None,
        }
    }
}

/// Walks an orbit accumulating `Σ log Df(f^i(x))` two ways: compensated and
/// streaming pairwise.
pub struct BirkhoffWalker<'a, T, M: ?Sized> {
    map: &'a M,
    point: LiftPoint<T>,
    steps: u64,
    comp: Neumaier<T>,
    pairwise: StreamingPairwise<T>,
    singular: Option<u64>,
}

/// Maximum allowed disagreement between the compensated and pairwise sums.
pub const SUM_CROSSCHECK_TOL: f64 = 1e-6;

impl<'a, T: Real, M: CircleMap<T> + ?Sized> BirkhoffWalker<'a, T, M> {
    pub fn new(map: &'a M, x: T) -> Self {
        Self {
            map,
            point: LiftPoint::new(x),
            steps: 0,
            comp: Neumaier::new(),
            pairwise: StreamingPairwise::new(),
            singular: None,
        }
    }

    /// Adds `log Df` at the current point and moves to the next one.
    #[inline]
    pub fn step(&mut self) {
        if self.singular.is_none() && !self.map.is_rigid() {
            let x = self.point.frac;
            let df = self.map.deriv(x);
            if is_singular(self.map, x, df) {
                self.singular = Some(self.steps);
            } else {
                let l = df.ln();
                self.comp.add(l);
                self.pairwise.add(l);
            }
        }
        self.point.advance(self.map);
        self.steps += 1;
    }

    pub fn advance(&mut self, n: u64) {
        for _ in 0..n {
            self.step();
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn point(&self) -> T {
        self.point.frac
    }

    pub fn lift_point(&self) -> LiftPoint<T> {
        self.point
    }

    pub fn sum(&self) -> LogSum<T> {
        match self.singular {
            Some(step) => LogSum::Singular { step },
            None => LogSum::Finite(self.comp.value()),
        }
    }

    /// Compensated sum, after checking it against the pairwise one.
    pub fn checked_sum(&self) -> Result<LogSum<T>> {
        if let LogSum::Finite(v) = self.sum() {
            let gap = (v - self.pairwise.value()).abs().as_f64();
            if gap > SUM_CROSSCHECK_TOL {
                return Err(Error::SummationMismatch(gap));
            }
        }
        Ok(self.sum())
    }
}

/// `Σ_{i<n} log Df(f^i(x))`, singular-tagged when the orbit meets a
/// critical point.
pub fn log_df_sum<T: Real, M: CircleMap<T> + ?Sized>(map: &M, x: T, n: u64) -> Result<LogSum<T>> {
    let mut w = BirkhoffWalker::new(map, x);
    w.advance(n);
    w.checked_sum()
}

/// `max |F(x+1) - F(x) - 1|` over an `n`-point grid of `[0, 1)`.
pub fn degree_one_defect<T: Real, M: CircleMap<T> + ?Sized>(map: &M, n: usize) -> f64 {
    let mut worst = 0f64;
    for k in 0..n {
        let x = T::of(k as f64 / n as f64);
        let d = (map.lift(x + T::one()) - map.lift(x) - T::one()).abs().as_f64();
        worst = worst.max(d);
    }
    worst
}

/// Largest jump `|F(x_{k+1}) - F(x_k)|` relative to its derivative-based
/// prediction; a continuous lift keeps this near one.
pub fn check_continuity<T: Real, M: CircleMap<T> + ?Sized>(map: &M, n: usize) -> Result<()> {
    let h = 1.0 / n as f64;
    // Df <= 3 for all built-ins; allow generous slack
    let bound = 8.0 * h;
    let mut prev = map.lift(T::zero());
    for k in 1..=n {
        let x = T::of(k as f64 * h);
        let y = map.lift(x);
        let jump = (y - prev).as_f64();
        if !(-1e-12..=bound).contains(&jump) {
            return Err(Error::Discontinuity(x.as_f64()));
        }
        prev = y;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::DoubleDouble as Dd;

    #[test]
    fn arnold_closed_forms() {
        let m = CircleMapModel::arnold_critical(0.3f64);
        assert_eq!(m.deriv(0.0), 0.0);
        assert!((m.deriv(0.5) - 2.0).abs() < 1e-15);
        for x in [0.0, 0.3, 0.77] {
            assert!((m.lift(x + 1.0) - m.lift(x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bicritical_normalization() {
        let m = CircleMapModel::bicritical_trig(0.1f64, 0.25).unwrap();
        assert!((m.normalization().unwrap() - 1.0).abs() < 1e-15);
        // midpoint rule is spectrally accurate for trigonometric polynomials
        let n = 64;
        let s: f64 = (0..n).map(|k| m.deriv((k as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
        assert!((s - 1.0).abs() < 1e-14);
        assert!((m.lift(1.0) - m.lift(0.0) - 1.0).abs() < 1e-14);
        assert_eq!(m.deriv(0.0), 0.0);
        assert!(m.deriv(0.25).abs() < 1e-16);
    }

    #[test]
    fn bicritical_guard() {
        assert!(CircleMapModel::bicritical_trig(0.1f64, 0.0).is_err());
    }

    #[test]
    fn blaschke_forms_agree_in_double_double() {
        let m = CircleMapModel::blaschke_circle(Dd::ratio(1, 5));
        let x = Dd::ratio(37, 100);
        let fd = central_difference(|t| m.lift(t), x, Dd::from_f64(1e-7));
        assert!(((fd - m.deriv(x)) / m.deriv(x)).hi().abs() < 1e-20);
        assert_eq!(m.lift(Dd::ZERO), Dd::ratio(1, 5));
    }

    #[test]
    fn power_law_constants_bracket() {
        let m = CircleMapModel::arnold_critical(0.2f64);
        let pl = m.critical_points()[0].power_law;
        let two_pi_sq = 2.0 * std::f64::consts::PI.powi(2);
        assert!(pl.a < two_pi_sq && pl.b > two_pi_sq * 0.99);
        assert!(pl.a > 0.9 * two_pi_sq);
        // B r^2 <= 1, so log Df <= 0 inside the neighborhood
        assert_eq!(pl.log_constant(3.0), Some(2.0));
    }

    #[test]
    fn orbit_and_log_sums() {
        let m = CircleMapModel::arnold_critical(0.4f64);
        assert_eq!(iterate(&m, 0.3, 0), 0.3);
        assert_eq!(log_df_sum(&m, 0.3, 0).unwrap(), LogSum::Finite(0.0));
        let a = log_df_sum(&m, 0.3, 50).unwrap().finite().unwrap();
        let b = log_df_sum(&m, 0.3, 20).unwrap().finite().unwrap();
        let c = log_df_sum(&m, iterate(&m, 0.3, 20), 30).unwrap().finite().unwrap();
        assert!((a - b - c).abs() < 1e-10);
        assert_eq!(log_df_sum(&m, 0.0, 3).unwrap(), LogSum::Singular { step: 0 });
    }

    #[test]
    fn lift_point_offsets() {
        let m = CircleMapModel::rigid(0.25f64);
        let p = lift_iterate(&m, 0.1, 8);
        assert_eq!(p.wind, 2);
        assert!(p.offset(0.1, 2).abs() < 1e-15);
    }

    #[test]
    fn fn_map_derivative() {
        let f = |x: f64| x + 0.2 - (std::f64::consts::TAU * x).sin() / std::f64::consts::TAU;
        let m = FnCircleMap::new(f, &[(0.0, 3.0)]);
        let exact = CircleMapModel::arnold_critical(0.2f64);
        let x = 0.37;
        assert!(((m.deriv(x) - exact.deriv(x)) / exact.deriv(x)).abs() < 1e-8);
        assert_eq!(m.critical_points().len(), 1);
    }

    #[test]
    fn blaschke_is_continuous() {
        let m = CircleMapModel::blaschke_circle(0.55f64);
        check_continuity(&m, 10_000).unwrap();
    }
}
