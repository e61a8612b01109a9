//! Period-doubling renormalization of the quadratic family
//! `f_t(x) = 1 - t x^2` on `[-1, 1]`, the tower of intervals `Δ_{j,n}`,
//! entrance times and the zero-mean checks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `R^n f_t` in closed composed form: `x ↦ f_t^q(λ x) / λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnimodalMap<T> {
    t: T,
    q: u64,
    lambda: T,
}

impl<T: Real> UnimodalMap<T> {
    pub fn family(t: T) -> Self {
        Self {
            t,
            q: 1,
            lambda: T::one(),
        }
    }

    pub fn t(&self) -> T {
        self.t
    }

    /// Number of base iterates composed.
    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn criticality(&self) -> u32 {
        2
    }

    #[inline]
    pub fn base(&self, x: T) -> T {
        T::one() - self.t * x * x
    }

    #[inline]
    pub fn base_deriv(&self, x: T) -> T {
        -T::of(2.0) * self.t * x
    }

    /// `f_t^n(x)`.
    pub fn base_iterate(&self, mut x: T, n: u64) -> T {
        for _ in 0..n {
            x = self.base(x);
        }
        x
    }

    pub fn eval(&self, x: T) -> T {
        self.base_iterate(self.lambda * x, self.q) / self.lambda
    }

    /// `Df_t^q(λx)`; the two rescalings cancel.
    pub fn deriv(&self, x: T) -> T {
        let mut y = self.lambda * x;
        let mut d = T::one();
        for _ in 0..self.q {
            d *= self.base_deriv(y);
            y = self.base(y);
        }
        d
    }

    pub fn iterate(&self, mut x: T, n: u64) -> T {
        for _ in 0..n {
            x = self.eval(x);
        }
        x
    }

    /// Largest `|f(x) - f(-x)|` over a uniform grid.
    pub fn evenness_defect(&self, grid: usize) -> f64 {
        (0..=grid)
            .map(|i| {
                let x = T::of(i as f64 / grid as f64);
                (self.eval(x) - self.eval(-x)).abs().as_f64()
            })
            .fold(0.0, f64::max)
    }
}

/// `Σ_{i<n} log|Df_t(f_t^i(x))|`, `None` if the orbit meets `0`.
pub fn log_abs_deriv<T: Real>(f: &UnimodalMap<T>, mut x: T, n: u64) -> Option<f64> {
    let mut s = crate::sum::Neumaier::new();
    for _ in 0..n {
        let d = f.base_deriv(x).abs();
        if d == T::zero() {
            return None;
        }
        s.add(d.ln());
        x = f.base(x);
    }
    Some(s.value().as_f64())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Period<T> {
    pub p: u32,
    /// `f^p(0)`.
    pub lambda: T,
}

const UNIMODAL_GRID: usize = 1000;

fn hull<T: Real>(a: T, b: T) -> (T, T) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn pairwise_disjoint<T: Real>(intervals: &[(T, T)]) -> bool {
    let mut v = intervals.to_vec();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite endpoints"));
    v.windows(2).all(|w| w[0].1 < w[1].0)
}

/// Smallest `p` in `[2, p_max]` for which `f^p` restricted to
/// `[-|λ|, |λ|]`, `λ = f^p(0)`, is a unimodal self-map whose first `p`
/// images of the central interval are disjoint.
pub fn detect_period<T: Real>(f: &UnimodalMap<T>, p_max: u32) -> Result<Period<T>> {
    let mut y = f.eval(T::zero());
    for p in 2..=p_max.max(2) {
        y = f.eval(y);
        let lambda = y;
        let r = lambda.abs();
        if r >= T::one() {
            continue;
        }
        if r < T::of(1e3) * T::epsilon() {
            return Err(Error::PrecisionExhausted(format!(
                "|f^{p}(0)| = {:e} is below resolution",
                r.as_f64()
            )));
        }
        if period_valid(f, p, r) {
            return Ok(Period { p, lambda });
        }
    }
    Err(Error::NotRenormalizable(p_max))
}

fn period_valid<T: Real>(f: &UnimodalMap<T>, p: u32, r: T) -> bool {
    // invariance and unimodality on a grid, the zero at 0 is structural
    let mut left_sign = None;
    let mut right_sign = None;
    for i in 0..=UNIMODAL_GRID {
        let s = T::of(i as f64 / UNIMODAL_GRID as f64);
        for x in [r * s, -r * s] {
            if f.iterate(x, p as u64).abs() > r {
                return false;
            }
        }
        if i == 0 {
            continue;
        }
        let dr = f_p_deriv(f, r * s, p);
        let dl = f_p_deriv(f, -r * s, p);
        if dr == T::zero() || dl == T::zero() {
            return false;
        }
        let (sr, sl) = (dr > T::zero(), dl > T::zero());
        if sr == sl || *right_sign.get_or_insert(sr) != sr || *left_sign.get_or_insert(sl) != sl {
            return false;
        }
    }
    let mut intervals = vec![(-r, r)];
    intervals.extend((1..p).map(|j| hull(f.iterate(T::zero(), j as u64), f.iterate(r, j as u64))));
    pairwise_disjoint(&intervals)
}

fn f_p_deriv<T: Real>(f: &UnimodalMap<T>, mut x: T, p: u32) -> T {
    let mut d = T::one();
    for _ in 0..p {
        d *= f.deriv(x);
        x = f.eval(x);
    }
    d
}

/// `Rf`, evaluated as a fresh `q·p`-fold composition of the base map.
pub fn renormalize<T: Real>(f: &UnimodalMap<T>) -> Result<UnimodalMap<T>> {
    let period = detect_period(f, DEFAULT_P_MAX)?;
    let q = f.q * period.p as u64;
    Ok(UnimodalMap {
        t: f.t,
        q,
        lambda: f.base_iterate(T::zero(), q),
    })
}

/// `g^p(μ x)/μ` with `μ = g^p(0)`: one renormalization step applied to
/// an already renormalized map.
pub fn renormalize_once<T: Real>(g: &UnimodalMap<T>, p: u32, x: T) -> T {
    let mu = g.iterate(T::zero(), p as u64);
    g.iterate(mu * x, p as u64) / mu
}

pub const DEFAULT_P_MAX: u32 = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeigenbaumSearch {
    /// `t_n` with `f_t^{2^n}(0) = 0`; `t_0 = 0`, `t_1 = 1`.
    pub superstable: Vec<f64>,
    /// `(t_{n-1} - t_{n-2}) / (t_n - t_{n-1})`, indexed from `n = 2`.
    pub ratios: Vec<f64>,
    /// Aitken extrapolation of the last three ratios.
    pub extrapolated_ratio: f64,
    pub t_inf: f64,
    pub bracket: (f64, f64),
}

impl FeigenbaumSearch {
    pub fn ratio(&self, n: usize) -> Option<f64> {
        n.checked_sub(2).and_then(|i| self.ratios.get(i)).copied()
    }

    /// Aitken extrapolation from `δ_{n-2}, δ_{n-1}, δ_n`.
    pub fn aitken(&self, n: usize) -> Option<f64> {
        let (a, b, c) = (self.ratio(n - 2)?, self.ratio(n - 1)?, self.ratio(n)?);
        Some(aitken(a, b, c))
    }
}

fn aitken(a: f64, b: f64, c: f64) -> f64 {
    let den = c - 2.0 * b + a;
    if den == 0.0 {
        c
    } else {
        c - (c - b) * (c - b) / den
    }
}

fn superstable_value<T: Real>(t: T, n: u32) -> T {
    UnimodalMap::family(t).base_iterate(T::zero(), 1u64 << n)
}

fn bisect_root<T: Real>(n: u32, mut a: T, mut b: T) -> T {
    let mut fa = superstable_value(a, n);
    for _ in 0..400 {
        let m = (a + b) * T::half();
        if m <= a || m >= b {
            break;
        }
        let fm = superstable_value(m, n);
        if fm == T::zero() {
            return m;
        }
        if (fm > T::zero()) == (fa > T::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    (a + b) * T::half()
}

/// Superstable parameters of the period-doubling cascade by scan and
/// bisection, each `t_n` searched just past `t_{n-1}`.
pub fn feigenbaum_search<T: Real>(depth: usize) -> Result<FeigenbaumSearch> {
    if depth < 3 {
        return Err(Error::InvalidArgument(format!("depth {depth} < 3")));
    }
    let mut ts: Vec<T> = vec![T::zero(), bisect_root(1, T::half(), T::of(1.5))];
    for n in 2..=depth {
        let prev = ts[n - 1];
        let gap = prev - ts[n - 2];
        if gap.as_f64() < 1e3 * T::epsilon().as_f64() {
            return Err(Error::PrecisionExhausted(format!("superstable spacing at level {n}")));
        }
        let h = gap / T::of(64.0);
        let mut a = prev + h;
        let sa = superstable_value(a, n as u32) > T::zero();
        let mut found = None;
        for _ in 0..128 {
            let b = a + h;
            if (superstable_value(b, n as u32) > T::zero()) != sa {
                found = Some(bisect_root(n as u32, a, b));
                break;
            }
            a = b;
        }
        let t = found.ok_or_else(|| Error::PrecisionExhausted(format!("no superstable root at level {n}")))?;
        ts.push(t);
    }
    let superstable: Vec<f64> = ts.iter().map(|t| t.as_f64()).collect();
    let ratios: Vec<f64> = (2..=depth)
        .map(|n| ((ts[n - 1] - ts[n - 2]) / (ts[n] - ts[n - 1])).as_f64())
        .collect();
    let k = ratios.len();
    let extrapolated_ratio = aitken(ratios[k - 3], ratios[k - 2], ratios[k - 1]);
    let last = (ts[depth] - ts[depth - 1]).as_f64();
    let t_n = superstable[depth];
    Ok(FeigenbaumSearch {
        t_inf: t_n + last / (extrapolated_ratio - 1.0),
        bracket: (t_n, t_n + last),
        superstable,
        ratios,
        extrapolated_ratio,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TowerLevel<T> {
    pub n: usize,
    /// `p(R^{n-1} f)`; `1` at level 0.
    pub period: u32,
    pub q: u64,
    /// `f^{q_n}(0)`.
    pub lambda: T,
    /// `Δ_{j,n}` for `0 <= j < q_n`.
    pub intervals: Vec<(T, T)>,
    /// `|λ_n - λ_{n-1} λ(R^{n-1} f)| / |λ_n|`.
    pub lambda_identity_defect: f64,
}

impl<T: Real> TowerLevel<T> {
    pub fn width(&self, j: usize) -> T {
        let (a, b) = self.intervals[j];
        b - a
    }

    /// Index of the interval containing `x`.
    pub fn locate(&self, x: T) -> Option<usize> {
        self.intervals.iter().position(|&(a, b)| a <= x && x <= b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenormalizationTower<T> {
    pub map: UnimodalMap<T>,
    pub levels: Vec<TowerLevel<T>>,
    /// Why the tower stopped before the requested depth.
    pub truncated: Option<String>,
}

pub const MAX_TOWER_Q: u64 = 10_000_000;

impl<T: Real> RenormalizationTower<T> {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, n: usize) -> &TowerLevel<T> {
        &self.levels[n]
    }

    pub fn q(&self, n: usize) -> u64 {
        self.levels[n].q
    }

    /// `a_n = q_{n+1} / q_n`.
    pub fn a(&self, n: usize) -> u64 {
        self.levels[n + 1].q / self.levels[n].q
    }

    /// `|Δ_{0,n}| / |Δ_{0,n+1}|`.
    pub fn scaling_ratios(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| (w[0].lambda.abs() / w[1].lambda.abs()).as_f64())
            .collect()
    }

    /// `min_j |Δ_{0,n}| / |Δ_{j,n}|`.
    pub fn central_dominance(&self, n: usize) -> f64 {
        let l = &self.levels[n];
        let c = l.width(0);
        (0..l.intervals.len()).map(|j| (c / l.width(j)).as_f64()).fold(f64::INFINITY, f64::min)
    }

    /// `Δ_{j,n}` for `0 <= j <= q_n`, the last one being `f^{q_n}(Δ_{0,n})`.
    pub fn interval(&self, n: usize, j: u64) -> (T, T) {
        let l = &self.levels[n];
        if j < l.q {
            return l.intervals[j as usize];
        }
        let f = &self.map;
        hull(f.base_iterate(T::zero(), j), f.base_iterate(l.lambda.abs(), j))
    }

    pub fn measure(&self, n: usize) -> AddingMachineMeasure {
        AddingMachineMeasure {
            level: n,
            q: self.q(n),
            weight: 1.0 / self.q(n) as f64,
        }
    }
}

/// Equal weight `1/q_n` on every cylinder `Δ_{i,n}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AddingMachineMeasure {
    pub level: usize,
    pub q: u64,
    pub weight: f64,
}

impl AddingMachineMeasure {
    pub fn total(&self) -> f64 {
        self.q as f64 * self.weight
    }
}

/// Renormalizes `f_t` level by level and validates disjointness, nesting
/// and the `λ`-composition identity.
pub fn build_tower<T: Real>(f: &UnimodalMap<T>, depth: usize) -> Result<RenormalizationTower<T>> {
    if f.q != 1 {
        return Err(Error::InvalidArgument("tower must start from the base map".into()));
    }
    let mut levels = vec![TowerLevel {
        n: 0,
        period: 1,
        q: 1,
        lambda: T::one(),
        intervals: vec![(-T::one(), T::one())],
        lambda_identity_defect: 0.0,
    }];
    let mut truncated = None;
    for n in 1..=depth {
        let prev = levels.last().expect("level 0");
        let g = UnimodalMap {
            t: f.t,
            q: prev.q,
            lambda: prev.lambda,
        };
        let period = match detect_period(&g, DEFAULT_P_MAX) {
            Ok(p) => p,
            Err(e) => {
                truncated = Some(format!("level {n}: {e}"));
                break;
            }
        };
        let q = prev.q * period.p as u64;
        if q > MAX_TOWER_Q {
            truncated = Some(format!("level {n}: q = {q} above budget"));
            break;
        }
        let lambda = f.base_iterate(T::zero(), q);
        let r = lambda.abs();
        let defect = ((lambda - prev.lambda * period.lambda).abs() / r).as_f64();
        let mut intervals = Vec::with_capacity(q as usize);
        intervals.push((-r, r));
        // f^j is monotone on [0, r] for j < q_n and f is even
        let (mut a, mut b) = (f.base(T::zero()), f.base(r));
        for _ in 1..q {
            intervals.push(hull(a, b));
            a = f.base(a);
            b = f.base(b);
        }
        if !pairwise_disjoint(&intervals) {
            truncated = Some(format!("level {n}: intervals overlap"));
            break;
        }
        let slack = T::of(1e3) * T::epsilon();
        let nested = intervals.iter().enumerate().all(|(j, &(lo, hi))| {
            let (plo, phi) = prev.intervals[j % prev.q as usize];
            lo >= plo - slack && hi <= phi + slack
        });
        if !nested {
            truncated = Some(format!("level {n}: not nested in level {}", n - 1));
            break;
        }
        levels.push(TowerLevel {
            n,
            period: period.p,
            q,
            lambda,
            intervals,
            lambda_identity_defect: defect,
        });
    }
    Ok(RenormalizationTower {
        map: *f,
        levels,
        truncated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SullivanReport {
    /// `(n, largest feasible τ on the grid)`; `None` if none is.
    pub levels: Vec<(usize, Option<f64>)>,
    pub inf: Option<f64>,
}

fn sullivan_feasible<T: Real>(intervals: &[(T, T)], tau: f64) -> bool {
    let mut v: Vec<(f64, f64)> = intervals.iter().map(|&(a, b)| (a.as_f64(), b.as_f64())).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reach = f64::NEG_INFINITY;
    for (a, b) in v {
        let w = b - a;
        if a - tau * w < reach {
            return false;
        }
        reach = reach.max(b + tau * w);
    }
    true
}

/// Largest grid `τ` for which the `τ`-scaled neighborhoods of the level-`n`
/// intervals are pairwise disjoint.
pub fn sullivan_space_check<T: Real>(tower: &RenormalizationTower<T>, tau_grid: &[f64]) -> SullivanReport {
    let mut grid = tau_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let levels: Vec<(usize, Option<f64>)> = tower
        .levels
        .iter()
        .map(|l| {
            let best = grid.iter().rev().find(|&&tau| sullivan_feasible(&l.intervals, tau)).copied();
            (l.n, best)
        })
        .collect();
    let inf = levels
        .iter()
        .skip(1)
        .map(|&(_, t)| t)
        .try_fold(f64::INFINITY, |m, t| t.map(|t| m.min(t)));
    SullivanReport { levels, inf }
}

/// `v_n(x) = min{j >= 0 : f^j(x) ∈ Δ_{0,n}}` for `0 <= n <= depth`.
pub fn entrance_times<T: Real>(tower: &RenormalizationTower<T>, x: T, depth: usize) -> Result<Vec<u64>> {
    let depth = depth.min(tower.depth());
    let f = &tower.map;
    let mut out = Vec::with_capacity(depth + 1);
    let mut y = x;
    let mut j = 0u64;
    for n in 0..=depth {
        let l = &tower.levels[n];
        let r = l.lambda.abs();
        while y.abs() > r {
            y = f.base(y);
            j += 1;
            if j >= l.q {
                return Err(Error::OrbitEscape { x: x.as_f64(), level: n });
            }
        }
        out.push(j);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CylinderFraction {
    pub level: usize,
    /// Level-`(n+1)` cylinders on which `v_{n+1} > v_n`.
    pub increased: u64,
    pub total: u64,
    /// Cylinders whose increment disagrees with the cylinder coding.
    pub coding_mismatches: u64,
}

impl CylinderFraction {
    /// `increased / total == 1 - 1/a` in integers.
    pub fn equals_one_minus_inverse(&self, a: u64) -> bool {
        self.increased * a == self.total * (a - 1)
    }
}

/// Expected `v_{n+1} - v_n` on `Δ_{j + k q_n, n+1}`.
pub fn coded_increment(j: u64, k: u64, a: u64, q: u64) -> u64 {
    match (j, k) {
        (0, 0) => 0,
        (0, _) => (a - k) * q,
        _ => (a - 1 - k) * q,
    }
}

/// Entrance-time increments sampled at the midpoint of every level-`(n+1)`
/// cylinder.
pub fn cylinder_fraction<T: Real>(tower: &RenormalizationTower<T>, n: usize) -> Result<CylinderFraction> {
    if n + 1 > tower.depth() {
        return Err(Error::LevelTooSmall {
            level: tower.depth(),
            min: n + 1,
        });
    }
    let q = tower.q(n);
    let a = tower.a(n);
    let next = &tower.levels[n + 1];
    let mut increased = 0;
    let mut mismatches = 0;
    for (i, &(lo, hi)) in next.intervals.iter().enumerate() {
        let x = (lo + hi) * T::half();
        let v = entrance_times(tower, x, n + 1)?;
        let inc = v[n + 1] - v[n];
        if inc > 0 {
            increased += 1;
        }
        let (j, k) = (i as u64 % q, i as u64 / q);
        if inc != coded_increment(j, k, a, q) {
            mismatches += 1;
        }
    }
    Ok(CylinderFraction {
        level: n,
        increased,
        total: next.q,
        coding_mismatches: mismatches,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoremBLevel {
    pub n: usize,
    pub q: u64,
    pub samples: usize,
    /// Max of `log|Df^{q_n}(x)|` over the samples.
    pub max_log_return: f64,
    /// Min of `log|Df^{v_n(x)}(x)|` over the samples outside `Δ_{0,n}`,
    /// where `v_n = 0` would make it trivially zero.
    pub min_log_entrance: f64,
    /// Max of `|log|Df^{q_n}(x)|| / q_n` over the samples.
    pub max_abs_normalized: f64,
    /// `log|Df^{q_n}(f(0))| / q_n`.
    pub critical_value_normalized: f64,
    /// `Σ_{1 <= j < q_n} ψ(mid Δ_{j,n}) / q_n` with `ψ = |log|Df||`.
    pub direct_integral: f64,
    /// Partial sums through this level of the two series bracketing `∫ψ dμ`.
    pub lower_series: f64,
    pub upper_series: f64,
    /// Least `C` with `L/C <= direct <= C U`.
    pub squeeze_constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremBReport {
    pub levels: Vec<TheoremBLevel>,
    /// `exp` of the largest `max_log_return`.
    pub c0: f64,
    /// `exp` of the smallest `min_log_entrance`.
    pub entrance_lower: f64,
}

/// Sample points of `Δ_{j,n}` at interior fractions, offset from the
/// midpoint so that the critical point is never hit.
fn cylinder_samples<T: Real>(level: &TowerLevel<T>, budget: usize) -> Vec<(usize, T)> {
    const OFFSET: f64 = 0.381_966_011_250_105;
    let per = budget.div_ceil(level.intervals.len()).max(1);
    let mut out = Vec::with_capacity(per * level.intervals.len());
    for (j, &(lo, hi)) in level.intervals.iter().enumerate() {
        for i in 0..per {
            let s = T::of((i as f64 + OFFSET) / per as f64);
            out.push((j, lo + s * (hi - lo)));
        }
    }
    out
}

/// Upper bound on `|Df^{q_n}|`, lower bound on `|Df^{v_n}|`, normalized
/// sums and the bracketing series, level by level.
pub fn theorem_b_verify<T: Real>(tower: &RenormalizationTower<T>, sample_count: usize) -> Result<TheoremBReport> {
    if tower.depth() < 5 {
        return Err(Error::LevelTooSmall {
            level: tower.depth(),
            min: 5,
        });
    }
    let f = &tower.map;
    let mut levels = Vec::with_capacity(tower.depth());
    let (mut lower, mut upper) = (0.0, 0.0);
    for n in 1..=tower.depth() {
        let l = &tower.levels[n];
        let q = l.q;
        let mut max_ret = f64::NEG_INFINITY;
        let mut min_ent = f64::INFINITY;
        let mut max_norm = 0f64;
        let samples = cylinder_samples(l, sample_count);
        for &(j, x) in &samples {
            let ret = log_abs_deriv(f, x, q).ok_or(Error::SingularOrbit { step: q })?;
            max_ret = max_ret.max(ret);
            max_norm = max_norm.max(ret.abs() / q as f64);
            if j > 0 {
                let v = q - j as u64;
                let ent = log_abs_deriv(f, x, v).ok_or(Error::SingularOrbit { step: v })?;
                min_ent = min_ent.min(ent);
            }
        }
        let fc = f.base(T::zero());
        let cv = log_abs_deriv(f, fc, q).ok_or(Error::SingularOrbit { step: q })? / q as f64;
        let psi = |x: T| -> f64 { f.base_deriv(x).abs().as_f64().ln().abs() };
        let direct = l.intervals[1..]
            .iter()
            .map(|&(a, b)| psi((a + b) * T::half()))
            .sum::<f64>()
            / q as f64;
        let prev = &tower.levels[n - 1];
        let ratio = (prev.lambda.abs() / l.lambda.abs()).as_f64().ln();
        lower += ratio / q as f64;
        upper += ratio / prev.q as f64;
        levels.push(TheoremBLevel {
            n,
            q,
            samples: samples.len(),
            max_log_return: max_ret,
            min_log_entrance: min_ent,
            max_abs_normalized: max_norm,
            critical_value_normalized: cv,
            direct_integral: direct,
            lower_series: lower,
            upper_series: upper,
            squeeze_constant: (lower / direct).max(direct / upper).max(1.0),
        });
    }
    let c0 = levels.iter().map(|l| l.max_log_return).fold(f64::NEG_INFINITY, f64::max).exp();
    let entrance_lower = levels.iter().map(|l| l.min_log_entrance).fold(f64::INFINITY, f64::min).exp();
    Ok(TheoremBReport {
        levels,
        c0,
        entrance_lower,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistortionRatio {
    pub n: usize,
    pub j: u64,
    pub k: u64,
    /// Extremes of `|Df^{k-j}(x)| |Δ_{j,n}| / |Δ_{k,n}|` over `x ∈ Δ_{j,n}`.
    pub min: f64,
    pub max: f64,
    pub k1: f64,
}

/// Bounded distortion of `f^{k-j} : Δ_{j,n} → Δ_{k,n}`.
pub fn distortion_check<T: Real>(
    tower: &RenormalizationTower<T>,
    j: u64,
    k: u64,
    n: usize,
    samples: usize,
) -> Result<DistortionRatio> {
    let q = tower.q(n);
    if !(1 <= j && j <= k && k <= q) {
        return Err(Error::InvalidArgument(format!("need 1 <= j <= k <= q_n, got j={j} k={k} q={q}")));
    }
    let (jlo, jhi) = tower.interval(n, j);
    let (klo, khi) = tower.interval(n, k);
    let scale = ((jhi - jlo) / (khi - klo)).as_f64().ln();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let samples = samples.max(2);
    for i in 0..samples {
        let s = T::of(i as f64 / (samples - 1) as f64);
        let x = jlo + s * (jhi - jlo);
        let l = log_abs_deriv(&tower.map, x, k - j).ok_or(Error::SingularOrbit { step: k - j })? + scale;
        lo = lo.min(l);
        hi = hi.max(l);
    }
    let (min, max) = (lo.exp(), hi.exp());
    Ok(DistortionRatio {
        n,
        j,
        k,
        min,
        max,
        k1: max.max(1.0 / min),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionScan {
    pub n: usize,
    pub k1: f64,
    pub worst_j: u64,
    /// Intervals immediately left and right of `Δ_{0,n}`.
    pub adjacent: Vec<u64>,
    pub k1_adjacent: f64,
}

/// Distortion of every first-return branch `f^{q_n - j}` at level `n`.
pub fn distortion_scan<T: Real>(tower: &RenormalizationTower<T>, n: usize, samples: usize) -> Result<DistortionScan> {
    let l = &tower.levels[n];
    let q = l.q;
    let mut order: Vec<usize> = (0..l.intervals.len()).collect();
    order.sort_by(|&a, &b| l.intervals[a].0.partial_cmp(&l.intervals[b].0).expect("finite"));
    let pos = order.iter().position(|&i| i == 0).expect("central interval");
    let adjacent: Vec<u64> = [pos.checked_sub(1), Some(pos + 1)]
        .into_iter()
        .flatten()
        .filter_map(|p| order.get(p).map(|&i| i as u64))
        .collect();
    let mut k1 = 1f64;
    let mut worst_j = 1;
    let mut k1_adjacent = 1f64;
    for j in 1..q {
        let r = distortion_check(tower, j, q, n, samples)?;
        if r.k1 > k1 {
            k1 = r.k1;
            worst_j = j;
        }
        if adjacent.contains(&j) {
            k1_adjacent = k1_adjacent.max(r.k1);
        }
    }
    Ok(DistortionScan {
        n,
        k1,
        worst_j,
        adjacent,
        k1_adjacent,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VisitReport {
    pub level: usize,
    pub orbit_length: u64,
    pub max_deviation: f64,
    /// `2/q_n + 1/M`.
    pub bound: f64,
}

/// Visit frequencies of the critical orbit to the level-`n` cylinders
/// against the adding-machine weights.
pub fn adding_machine_check<T: Real>(tower: &RenormalizationTower<T>, n: usize, orbit_length: u64) -> Result<VisitReport> {
    let l = &tower.levels[n];
    let mut order: Vec<usize> = (0..l.intervals.len()).collect();
    order.sort_by(|&a, &b| l.intervals[a].0.partial_cmp(&l.intervals[b].0).expect("finite"));
    let lefts: Vec<T> = order.iter().map(|&i| l.intervals[i].0).collect();
    let mut counts = vec![0u64; l.intervals.len()];
    let mut x = tower.map.base(T::zero());
    for _ in 0..orbit_length {
        let k = lefts.partition_point(|&a| a <= x);
        let idx = k.checked_sub(1).map(|k| order[k]);
        match idx {
            Some(i) if x <= l.intervals[i].1 => counts[i] += 1,
            _ => return Err(Error::OrbitEscape { x: x.as_f64(), level: n }),
        }
        x = tower.map.base(x);
    }
    let w = 1.0 / l.q as f64;
    let m = orbit_length as f64;
    let max_deviation = counts.iter().map(|&c| (c as f64 / m - w).abs()).fold(0.0, f64::max);
    Ok(VisitReport {
        level: n,
        orbit_length,
        max_deviation,
        bound: 2.0 * w + 1.0 / m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_and_evenness() {
        let f = UnimodalMap::family(1.4f64);
        assert_eq!(f.eval(0.0), 1.0);
        assert_eq!(f.deriv(0.0), 0.0);
        assert!(f.evenness_defect(100) < 1e-15);
    }

    #[test]
    fn small_t_not_renormalizable() {
        let f = UnimodalMap::family(0.5f64);
        assert!(matches!(detect_period(&f, 8), Err(Error::NotRenormalizable(8))));
    }

    #[test]
    fn period_two_past_first_superstable() {
        let f = UnimodalMap::family(1.1f64);
        let p = detect_period(&f, 8).unwrap();
        assert_eq!(p.p, 2);
        assert!((p.lambda + 0.1).abs() < 1e-15);
    }

    #[test]
    fn coded_increments_sum_to_fraction() {
        for a in 2..5u64 {
            let q = 4;
            let inc = (0..a * q).filter(|&i| coded_increment(i % q, i / q, a, q) > 0).count() as u64;
            assert_eq!(inc * a, a * q * (a - 1));
        }
    }
}
