//! Birkhoff sums of `log Df` along closest-return times, two-sided bounds
//! on `Df^{q_n}`, Collet–Eckmann diagnostics and the full-measure sets
//! `A_n`.

use serde::Serialize;

use crate::circle_maps::{BirkhoffWalker, CircleMap, LogSum};
use crate::contfrac::RotationNumber;
use crate::error::{Error, Result};
use crate::invariant_measure::atom_measure;
use crate::partitions::OrbitTable;
use crate::rotation::certified_level;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentEntry {
    pub level: usize,
    pub q: u64,
    /// `log Df^{q_n}(x)`; `None` once the orbit has met a critical point.
    pub sum: Option<f64>,
    pub normalized: Option<f64>,
}

impl ExponentEntry {
    pub fn singular(&self) -> bool {
        self.sum.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentTrace {
    pub x: f64,
    pub entries: Vec<ExponentEntry>,
    /// Iterate at which the orbit met a critical point.
    pub singular_at: Option<u64>,
}

impl ExponentTrace {
    pub fn last_finite(&self) -> Option<&ExponentEntry> {
        self.entries.iter().rev().find(|e| !e.singular())
    }
}

fn ensure_certified<T: Real, M: CircleMap<T> + ?Sized>(map: &M, theta: &RotationNumber<T>, level: usize) -> Result<()> {
    if map.is_rigid() {
        return Ok(());
    }
    let c = map.critical_points().first().map(|c| c.c).unwrap_or_else(T::zero);
    let got = certified_level(map, c, theta, level).unwrap_or(0);
    if got < level {
        return Err(Error::NotCertified { level, available: got });
    }
    Ok(())
}

/// `log Df^{q_n}(x)` and `log Df^{q_n}(x)/q_n` for each requested level.
pub fn subsequence_exponents<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    theta: &RotationNumber<T>,
    x: T,
    levels: &[usize],
) -> Result<ExponentTrace> {
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    let top = *levels.last().ok_or_else(|| Error::InvalidArgument("no levels".into()))?;
    ensure_certified(map, theta, top)?;
    let mut walker = BirkhoffWalker::new(map, x);
    let mut entries = Vec::with_capacity(levels.len());
    for &n in &levels {
        let q = theta.q(n);
        walker.advance(q - walker.steps());
        let (sum, normalized) = match walker.checked_sum()? {
            LogSum::Finite(s) => (Some(s.as_f64()), Some(s.as_f64() / q as f64)),
            LogSum::Singular { .. } => (None, None),
        };
        entries.push(ExponentEntry {
            level: n,
            q,
            sum,
            normalized,
        });
    }
    let singular_at = match walker.sum() {
        LogSum::Singular { step } => Some(step),
        LogSum::Finite(_) => None,
    };
    Ok(ExponentTrace {
        x: x.as_f64(),
        entries,
        singular_at,
    })
}

/// `|log Df^{m+k}(x) - log Df^m(x) - log Df^k(f^m(x))|`.
pub fn additivity_defect<T: Real, M: CircleMap<T> + ?Sized>(map: &M, x: T, m: u64, k: u64) -> Result<f64> {
    let mut whole = BirkhoffWalker::new(map, x);
    whole.advance(m);
    let head = whole.checked_sum()?;
    let mid = whole.point();
    whole.advance(k);
    let mut tail = BirkhoffWalker::new(map, mid);
    tail.advance(k);
    match (whole.checked_sum()?, head, tail.checked_sum()?) {
        (LogSum::Finite(a), LogSum::Finite(b), LogSum::Finite(c)) => Ok((a - b - c).abs().as_f64()),
        _ => Err(Error::SingularOrbit { step: m + k }),
    }
}

/// Sample parameters in `[0, 1]`, uniform plus geometric clusters
/// `2^-k` at both ends.
pub fn stratified_unit(count: usize) -> Vec<f64> {
    let count = count.max(2);
    let clusters = (count / 4).min(40);
    let uniform = count - 2 * clusters;
    let mut s: Vec<f64> = (0..uniform).map(|i| i as f64 / (uniform - 1).max(1) as f64).collect();
    for k in 1..=clusters {
        let r = 0.5f64.powi(k as i32 + 1);
        s.push(r);
        s.push(1.0 - r);
    }
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

fn log_deriv_iterate<T: Real, M: CircleMap<T> + ?Sized>(map: &M, x: T, n: u64) -> Result<Option<f64>> {
    let mut w = BirkhoffWalker::new(map, x);
    w.advance(n);
    Ok(w.checked_sum()?.finite().map(|v| v.as_f64()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LemmaInReport {
    pub level: usize,
    pub samples: usize,
    pub min: f64,
    pub max: f64,
    /// `max(max, 1/min)` of `Df^{q_{n+1}}` on `I_n ∖ I_{n+2}`.
    pub c_n: f64,
}

/// Two-sided bound on `Df^{q_{n+1}}` over `I_n(c) ∖ I_{n+2}(c)`.
pub fn lemma_in_check<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    theta: &RotationNumber<T>,
    n: usize,
    sample_count: usize,
) -> Result<LemmaInReport> {
    let crit = map.critical_points();
    if crit.len() > 1 {
        return Err(Error::UnicriticalOnly(crit.len()));
    }
    ensure_certified(map, theta, n + 2)?;
    let c = crit.first().map(|c| c.c).unwrap_or_else(T::zero);
    let orbit = OrbitTable::new(map, c, theta.q(n + 2) as usize + 1);
    let outer = orbit.return_length(theta.q(n));
    let inner = orbit.return_length(theta.q(n + 2));
    let sign = if n.is_multiple_of(2) { T::one() } else { -T::one() };
    let params = stratified_unit(sample_count);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &s in &params {
        let off = inner + T::of(s) * (outer - inner);
        let x = (c + sign * off).fract_pos();
        let Some(l) = log_deriv_iterate(map, x, theta.q(n + 1))? else {
            continue;
        };
        lo = lo.min(l);
        hi = hi.max(l);
    }
    let (min, max) = (lo.exp(), hi.exp());
    Ok(LemmaInReport {
        level: n,
        samples: params.len(),
        min,
        max,
        c_n: max.max(1.0 / min),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MulticriticalReport {
    pub level: usize,
    pub grid_size: usize,
    /// Max of `log Df^{q_n}(x)` over the whole grid.
    pub c_upper: f64,
    /// Min of `log Df^{q_n}(x) / n` over the avoiding sub-grid.
    pub lower_normalized_min: f64,
    /// `max(0, -lower_normalized_min)`.
    pub c_lower: f64,
    pub avoiding: usize,
    pub excluded: usize,
}

/// The grid of base points: uniform, plus points at distance `2^-k` on
/// both sides of every critical point.
pub fn base_grid<T: Real, M: CircleMap<T> + ?Sized>(map: &M, grid: usize) -> Vec<T> {
    let mut xs: Vec<T> = (0..grid).map(|i| T::of(i as f64 / grid as f64)).collect();
    for cp in map.critical_points() {
        for k in 2..=24 {
            let r = T::of(0.5f64.powi(k));
            xs.push((cp.c + r).fract_pos());
            xs.push((cp.c - r).fract_pos());
        }
    }
    xs
}

/// `J_m(c)` as offsets `(ahead, behind)` of `c`.
fn j_arc<T: Real>(orbit: &OrbitTable<T>, theta: &RotationNumber<T>, m: usize) -> (T, T) {
    let a = orbit.return_length(theta.q(m));
    let b = orbit.return_length(theta.q(m + 1));
    if m.is_multiple_of(2) {
        (a, b)
    } else {
        (b, a)
    }
}

fn in_arc<T: Real>(x: T, c: T, (ahead, behind): (T, T)) -> bool {
    let s = (x - c).fract_pos();
    s <= ahead || s >= T::one() - behind
}

/// Upper bound on `log Df^{q_n}` everywhere and lower bound `-C n` where
/// the first `q_n` iterates avoid every `J_{2n}(c_j)`.
pub fn multicritical_bounds_check<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    theta: &RotationNumber<T>,
    n: usize,
    grid: usize,
) -> Result<MulticriticalReport> {
    ensure_certified(map, theta, 2 * n + 1)?;
    let crit = map.critical_points();
    let len = theta.q(2 * n + 1) as usize + 1;
    let arcs: Vec<(T, (T, T))> = crit
        .iter()
        .map(|cp| {
            let orbit = OrbitTable::new(map, cp.c, len);
            (cp.c, j_arc(&orbit, theta, 2 * n))
        })
        .collect();
    let qn = theta.q(n);
    let xs = base_grid(map, grid);
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::INFINITY;
    let mut avoiding = 0;
    for &x in &xs {
        let mut w = BirkhoffWalker::new(map, x);
        let mut avoids = true;
        for _ in 0..qn {
            avoids = avoids && !arcs.iter().any(|&(c, arc)| in_arc(w.point(), c, arc));
            w.step();
        }
        avoids = avoids && !arcs.iter().any(|&(c, arc)| in_arc(w.point(), c, arc));
        let Some(l) = w.checked_sum()?.finite().map(|v| v.as_f64()) else {
            continue;
        };
        upper = upper.max(l);
        if avoids {
            avoiding += 1;
            lower = lower.min(l / n as f64);
        }
    }
    if avoiding == 0 {
        return Err(Error::EmptyAvoidanceGrid { level: n });
    }
    Ok(MulticriticalReport {
        level: n,
        grid_size: xs.len(),
        c_upper: upper,
        lower_normalized_min: lower,
        c_lower: (-lower).max(0.0),
        avoiding,
        excluded: xs.len() - avoiding,
    })
}

pub const CE_THRESHOLDS: [f64; 4] = [0.5, 0.1, 0.05, 0.01];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CeVerdict {
    /// Normalized sums at return times fall below every threshold.
    CeViolatedEvidence,
    /// The exponent is `-∞`, or `Df ≡ 1`.
    CeTriviallyViolated,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdHit {
    pub threshold: f64,
    /// First level whose normalized return-time sum is below the threshold.
    pub level: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalValueTrace {
    pub critical_point: f64,
    pub critical_value: f64,
    /// `(n, q_n, log Df^{q_n}(f(c)) / q_n)` for `q_n <= N`.
    pub returns: Vec<(usize, u64, f64)>,
    /// Running minimum of `(1/m) log Df^m(f(c))` over `(q_n - q_{n-1}, q_n]`.
    pub liminf: Vec<(usize, f64)>,
    pub hits: Vec<ThresholdHit>,
    pub singular_at: Option<u64>,
    pub verdict: CeVerdict,
    /// `(m, (1/m) log Df^m(f(c)))` at geometrically spaced `m`.
    pub trace: Vec<(u64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CeDiagnostic {
    pub horizon: u64,
    pub values: Vec<CriticalValueTrace>,
}

/// Normalized Birkhoff sums along the critical values up to time `N`.
pub fn ce_diagnostic<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    theta: &RotationNumber<T>,
    horizon: u64,
) -> Result<CeDiagnostic> {
    if horizon < theta.q(5) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} below q_5 = {}", theta.q(5))));
    }
    let crit = map.critical_points();
    let points: Vec<T> = if crit.is_empty() {
        vec![T::zero()]
    } else {
        crit.iter().map(|c| c.c).collect()
    };
    let top = (0..=theta.max_level()).take_while(|&k| theta.q(k) <= horizon).last().unwrap_or(0);
    let mut values = Vec::with_capacity(points.len());
    for c in points {
        let v = map.apply(c);
        let mut w = BirkhoffWalker::new(map, v);
        let mut normalized = Vec::with_capacity(horizon as usize);
        let mut trace = Vec::new();
        let mut mark = 1u64;
        while w.steps() < horizon {
            w.step();
            let m = w.steps();
            match w.sum() {
                LogSum::Finite(s) => normalized.push(s.as_f64() / m as f64),
                LogSum::Singular { .. } => break,
            }
            if m == mark || m == horizon {
                trace.push((m, *normalized.last().unwrap()));
                mark = (mark as f64 * 1.25).ceil() as u64;
            }
        }
        w.checked_sum()?;
        let singular_at = match w.sum() {
            LogSum::Singular { step } => Some(step),
            LogSum::Finite(_) => None,
        };
        let mut returns = Vec::new();
        let mut liminf = Vec::new();
        for n in 0..=top {
            let q = theta.q(n);
            let Some(&val) = normalized.get(q as usize - 1) else {
                break;
            };
            returns.push((n, q, val));
            let width = if n == 0 { 1 } else { theta.q(n - 1) };
            let from = q.saturating_sub(width) as usize;
            let min = normalized[from..q as usize].iter().copied().fold(f64::INFINITY, f64::min);
            liminf.push((n, min));
        }
        let hits: Vec<ThresholdHit> = CE_THRESHOLDS
            .iter()
            .map(|&t| ThresholdHit {
                threshold: t,
                level: returns.iter().find(|r| r.2 < t).map(|r| r.0),
            })
            .collect();
        let verdict = if singular_at.is_some() || map.is_rigid() {
            CeVerdict::CeTriviallyViolated
        } else if hits.iter().all(|h| h.level.is_some()) {
            CeVerdict::CeViolatedEvidence
        } else {
            CeVerdict::Inconclusive
        };
        values.push(CriticalValueTrace {
            critical_point: c.as_f64(),
            critical_value: v.as_f64(),
            returns,
            liminf,
            hits,
            singular_at,
            verdict,
            trace,
        });
    }
    Ok(CeDiagnostic { horizon, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OccupancyRow {
    pub level: usize,
    pub a_next: u64,
    /// `μ(A_n) = a_{n+1} q_{n+1} μ(I_{n+1})`.
    pub measure: f64,
    /// `q_{n+1} (μ(I_n) - μ(I_{n+2}))`, the same quantity computed directly.
    pub measure_direct: f64,
    pub bound: f64,
    pub holds: bool,
    /// `q_n μ(J_{2n})`.
    pub q_mu_j2n: f64,
    /// `1 - N q_n μ(J_{2n})` for `N` critical points.
    pub multicritical_bound: f64,
}

/// Exact measures of the sets `A_n` from the convergents of `θ`.
pub fn full_measure_set_probe<T: Real>(
    theta: &RotationNumber<T>,
    levels: std::ops::RangeInclusive<usize>,
    critical_count: usize,
) -> Vec<OccupancyRow> {
    levels
        .map(|n| {
            let a = theta.quotient(n + 1);
            let q1 = T::from_u64_exact(theta.q(n + 1));
            let am = atom_measure(theta, n + 1);
            let measure = T::from_u64_exact(a) * q1 * am.weight_long;
            let direct = q1 * theta.distance(n) - q1 * theta.distance(n + 2);
            let bound = a as f64 / (a as f64 + 2.0);
            let j = theta.distance(2 * n) + theta.distance(2 * n + 1);
            let qj = (T::from_u64_exact(theta.q(n)) * j).as_f64();
            OccupancyRow {
                level: n,
                a_next: a,
                measure: measure.as_f64(),
                measure_direct: direct.as_f64(),
                bound,
                holds: measure.as_f64() > bound,
                q_mu_j2n: qj,
                multicritical_bound: 1.0 - critical_count as f64 * qj,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistortionReport {
    pub level: usize,
    pub samples: usize,
    /// `max Df^{q_n - 1}(x) / Df^{q_n - 1}(y)` over `x, y ∈ f(I_{n+1}(c))`.
    pub k1: f64,
}

/// Distortion of `f^{q_n - 1}` on `f(I_{n+1}(c))`.
pub fn distortion_check<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    theta: &RotationNumber<T>,
    n: usize,
    sample_count: usize,
) -> Result<DistortionReport> {
    let crit = map.critical_points();
    if crit.len() > 1 {
        return Err(Error::UnicriticalOnly(crit.len()));
    }
    ensure_certified(map, theta, n + 1)?;
    let c = crit.first().map(|c| c.c).unwrap_or_else(T::zero);
    let orbit = OrbitTable::new(map, c, theta.q(n + 1) as usize + 1);
    let len = orbit.return_length(theta.q(n + 1));
    let sign = if n.is_multiple_of(2) { -T::one() } else { T::one() };
    let params = stratified_unit(sample_count);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &s in &params {
        let z = (c + sign * T::of(s) * len).fract_pos();
        let Some(l) = log_deriv_iterate(map, map.apply(z), theta.q(n) - 1)? else {
            continue;
        };
        lo = lo.min(l);
        hi = hi.max(l);
    }
    Ok(DistortionReport {
        level: n,
        samples: params.len(),
        k1: (hi - lo).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle_maps::CircleMapModel;

    #[test]
    fn rigid_everything_trivial() {
        let theta = RotationNumber::<f64>::golden(60);
        let m = CircleMapModel::rigid(theta.value());
        let tr = subsequence_exponents(&m, &theta, 0.3, &[3, 5, 8]).unwrap();
        assert!(tr.entries.iter().all(|e| e.sum == Some(0.0)));
        let r = lemma_in_check(&m, &theta, 5, 20).unwrap();
        assert_eq!(r.c_n, 1.0);
        let mc = multicritical_bounds_check(&m, &theta, 4, 16).unwrap();
        assert_eq!((mc.c_upper, mc.c_lower), (0.0, 0.0));
        let ce = ce_diagnostic(&m, &theta, 1000).unwrap();
        assert_eq!(ce.values[0].verdict, CeVerdict::CeTriviallyViolated);
    }

    #[test]
    fn stratified_reaches_both_ends() {
        let s = stratified_unit(40);
        assert!(s[1] < 1e-2 && s[s.len() - 2] > 1.0 - 1e-2);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn golden_occupancy_worst_case() {
        let theta = RotationNumber::<f64>::golden(60);
        for row in full_measure_set_probe(&theta, 0..=20, 1) {
            assert!(row.holds);
            assert!((row.measure - row.measure_direct).abs() < 1e-12);
            assert!((row.bound - 1.0 / 3.0).abs() < 1e-15);
        }
    }
}
