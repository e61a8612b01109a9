//! Dynamical partitions `P_n(c)` built from one shared orbit of `c`.
//!
//! `P_n(c)` is cut by the points `f^j(c)`, `0 <= j < q_n + q_{n+1}`. Its atoms
//! are `f^i(I_n)` for `i < q_{n+1}` ("long") and `f^j(I_{n+1})` for `j < q_n`
//! ("short"), where `I_n = [c, f^{q_n}(c)]` lies ahead of `c` for even `n`
//! and behind it for odd `n`.

use serde::Serialize;

use crate::circle_maps::{CircleMap, LiftPoint};
use crate::contfrac::RotationNumber;
use crate::error::{Error, Result};
use crate::rotation::certified_level;
use crate::scalar::Real;
use crate::sum::pairwise_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generation {
    /// An iterate of `I_n`.
    Long,
    /// An iterate of `I_{n+1}`.
    Short,
}

impl Generation {
    pub fn as_str(self) -> &'static str {
        match self {
            Generation::Long => "long",
            Generation::Short => "short",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom<T> {
    /// Endpoints as points of `[0, 1)`, in positive circular order.
    pub left: T,
    pub right: T,
    /// Offset of `left` from `c`, in `[0, 1)`.
    pub start: T,
    /// Offset of `right` from `c`, in `(0, 1]`. Kept exact rather than
    /// recomputed as `start + length`.
    pub end: T,
    pub length: T,
    pub generation: Generation,
    pub iterate: u64,
}

impl<T: Real> Atom<T> {
    /// Point at fraction `s` of the atom, reduced mod 1.
    pub fn at(&self, s: T) -> T {
        (self.left + s * self.length).fract_pos()
    }

    /// Circle distance from `c` (the atom's base point) to the atom.
    pub fn distance_to_base(&self) -> T {
        self.start.min(T::one() - self.end)
    }
}

/// The orbit `f^j(c)` shared across levels, so that every level's endpoints
/// are literally the same numbers and nesting is exact.
#[derive(Clone, Debug)]
pub struct OrbitTable<T> {
    pub c: T,
    points: Vec<T>,
    offsets: Vec<T>,
}

impl<T: Real> OrbitTable<T> {
    pub fn new<M: CircleMap<T> + ?Sized>(map: &M, c: T, len: usize) -> Self {
        let mut points = Vec::with_capacity(len);
        let mut offsets = Vec::with_capacity(len);
        let mut p = LiftPoint::new(c);
        let c0 = p.frac;
        for _ in 0..len {
            points.push(p.frac);
            offsets.push((p.frac - c0).fract_pos());
            p.advance(map);
        }
        Self { c: c0, points, offsets }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, j: usize) -> T {
        self.points[j]
    }

    /// `f^j(c) - c` reduced to `[0, 1)`.
    pub fn offset(&self, j: usize) -> T {
        self.offsets[j]
    }

    /// `|I_k(c)| = d(c, f^{q_k}(c))`.
    pub fn return_length(&self, q: u64) -> T {
        let o = self.offsets[q as usize];
        o.min(T::one() - o)
    }
}

#[derive(Clone, Debug)]
pub struct DynamicalPartition<T> {
    pub level: usize,
    pub c: T,
    pub q_n: u64,
    pub q_next: u64,
    /// Circular order starting with the atom whose left endpoint is `c`.
    pub atoms: Vec<Atom<T>>,
}

/// Floor on atom length, relative to unit roundoff.
pub const MIN_ATOM_FACTOR: f64 = 1e3;

impl<T: Real> DynamicalPartition<T> {
    /// Builds level `n` from a shared orbit of length at least
    /// `q_n + q_{n+1}`, validating the combinatorics of every gap.
    pub fn from_orbit(orbit: &OrbitTable<T>, theta: &RotationNumber<T>, n: usize) -> Result<Self> {
        if n + 1 > theta.max_level() {
            return Err(Error::InvalidArgument(format!("rotation number has no level {}", n + 1)));
        }
        let (qn, qn1) = (theta.q(n), theta.q(n + 1));
        let total = (qn + qn1) as usize;
        if orbit.len() < total {
            return Err(Error::InvalidArgument(format!(
                "orbit of length {} too short for level {n}",
                orbit.len()
            )));
        }
        let mut order: Vec<u32> = (0..total as u32).collect();
        order.sort_by(|&a, &b| {
            orbit
                .offset(a as usize)
                .partial_cmp(&orbit.offset(b as usize))
                .expect("finite offsets")
                .then(a.cmp(&b))
        });
        if order[0] != 0 {
            return Err(Error::CombinatorialMismatch {
                level: n,
                detail: "base point is not first in circular order".into(),
            });
        }
        let even = n.is_multiple_of(2);
        let (long_step, short_step) = if even {
            (qn as i64, -(qn1 as i64))
        } else {
            (-(qn as i64), qn1 as i64)
        };
        let floor = T::of(MIN_ATOM_FACTOR) * T::epsilon();
        let mut atoms = Vec::with_capacity(total);
        for k in 0..total {
            let a = order[k] as usize;
            let (b, end) = if k + 1 < total {
                let b = order[k + 1] as usize;
                (b, orbit.offset(b))
            } else {
                (0, T::one())
            };
            let start = orbit.offset(a);
            let length = end - start;
            if length <= floor {
                return Err(Error::PrecisionExhausted(format!(
                    "atom {k} at level {n} has length {:e}",
                    length.as_f64()
                )));
            }
            let d = b as i64 - a as i64;
            let (generation, iterate) = if d == long_step {
                (Generation::Long, a.min(b) as u64)
            } else if d == short_step {
                (Generation::Short, a.min(b) as u64)
            } else {
                return Err(Error::CombinatorialMismatch {
                    level: n,
                    detail: format!("gap between f^{a}(c) and f^{b}(c)"),
                });
            };
            atoms.push(Atom {
                left: orbit.point(a),
                right: orbit.point(b),
                start,
                end,
                length,
                generation,
                iterate,
            });
        }
        Ok(Self {
            level: n,
            c: orbit.c,
            q_n: qn,
            q_next: qn1,
            atoms,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_length(&self) -> T {
        let lens: Vec<T> = self.atoms.iter().map(|a| a.length).collect();
        pairwise_sum(&lens)
    }

    pub fn count(&self, g: Generation) -> usize {
        self.atoms.iter().filter(|a| a.generation == g).count()
    }

    /// The two atoms touching `c`: `I_n` and `I_{n+1}`.
    pub fn base_atoms(&self) -> (usize, usize) {
        let last = self.atoms.len() - 1;
        if self.level.is_multiple_of(2) {
            (0, last)
        } else {
            (last, 0)
        }
    }

    pub fn min_length(&self) -> T {
        self.atoms.iter().map(|a| a.length).fold(T::one(), |m, l| m.min(l))
    }

    /// Largest length ratio of circularly adjacent atoms.
    pub fn adjacent_ratio(&self) -> (T, usize) {
        let n = self.atoms.len();
        let mut worst = T::one();
        let mut at = 0;
        for k in 0..n {
            let a = self.atoms[k].length;
            let b = self.atoms[(k + 1) % n].length;
            let r = if a > b { a / b } else { b / a };
            if r > worst {
                worst = r;
                at = k;
            }
        }
        (worst, at)
    }

    /// `S_n(c) = Σ |I| / d(c, I)` over atoms other than `I_n`, `I_{n+1}`.
    pub fn s_sum(&self) -> T {
        let n = self.atoms.len();
        if n <= 2 {
            return T::zero();
        }
        let terms: Vec<T> = self.atoms[1..n - 1]
            .iter()
            .map(|a| a.length / a.distance_to_base())
            .collect();
        pairwise_sum(&terms)
    }

    /// Index of the atom containing the point at offset `s` from `c`.
    pub fn locate(&self, s: T) -> usize {
        let idx = self.atoms.partition_point(|a| a.start <= s);
        idx.saturating_sub(1)
    }

    /// Every atom of `finer` lies inside an atom of `self`.
    pub fn is_refined_by(&self, finer: &DynamicalPartition<T>) -> bool {
        finer.atoms.iter().all(|f| {
            let k = self.locate(f.start);
            let a = &self.atoms[k];
            f.start >= a.start && f.end <= a.end
        })
    }
}

/// Partitions at levels `1..=n_max` sharing one orbit.
#[derive(Clone, Debug)]
pub struct PartitionLadder<T> {
    pub orbit: OrbitTable<T>,
    pub levels: Vec<DynamicalPartition<T>>,
    /// Level through which the orbit of `c` follows the combinatorics of θ.
    pub certified: usize,
}

impl<T: Real> PartitionLadder<T> {
    /// Builds `P_n(c)` for `n_min <= n <= n_max`.
    pub fn build<M: CircleMap<T> + ?Sized>(
        map: &M,
        c: T,
        theta: &RotationNumber<T>,
        n_min: usize,
        n_max: usize,
    ) -> Result<Self> {
        if n_max + 2 > theta.max_level() {
            return Err(Error::InvalidArgument(format!(
                "rotation number too shallow for level {n_max}"
            )));
        }
        let certified = if map.is_rigid() {
            theta.max_level()
        } else {
            certified_level(map, c, theta, n_max + 2).unwrap_or(0)
        };
        if certified < n_max + 1 {
            return Err(Error::NotCertified {
                level: n_max + 1,
                available: certified,
            });
        }
        let len = (theta.q(n_max) + theta.q(n_max + 1)) as usize;
        let orbit = OrbitTable::new(map, c, len.max(theta.q(n_max + 1) as usize + 1));
        let levels = (n_min..=n_max)
            .map(|n| DynamicalPartition::from_orbit(&orbit, theta, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            orbit,
            levels,
            certified,
        })
    }

    pub fn level(&self, n: usize) -> Option<&DynamicalPartition<T>> {
        self.levels.iter().find(|p| p.level == n)
    }
}

/// Longest orbit a ladder may request.
pub const ORBIT_BUDGET: u64 = 2_000_000;

/// Largest level `n <= n_cap` whose partition is both certified (with two
/// levels of margin) and resolvable: orbit within budget and every atom
/// above `10^3` roundoff.
pub fn precision_ceiling<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    c: T,
    theta: &RotationNumber<T>,
    n_cap: usize,
) -> usize {
    let mut n = n_cap.min(theta.max_level().saturating_sub(2));
    while n > 1 && theta.q(n) + theta.q(n + 1) > ORBIT_BUDGET {
        n -= 1;
    }
    if !map.is_rigid() {
        let certified = certified_level(map, c, theta, n + 2).unwrap_or(0);
        n = n.min(certified.saturating_sub(2));
    }
    if n < 1 {
        return 0;
    }
    let orbit = OrbitTable::new(map, c, (theta.q(n) + theta.q(n + 1)) as usize);
    while n >= 1 && DynamicalPartition::from_orbit(&orbit, theta, n).is_err() {
        n -= 1;
    }
    n
}

/// Single-level convenience wrapper around [`PartitionLadder`].
pub fn build_partition<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    c: T,
    theta: &RotationNumber<T>,
    n: usize,
) -> Result<DynamicalPartition<T>> {
    let mut ladder = PartitionLadder::build(map, c, theta, n, n)?;
    Ok(ladder.levels.remove(0))
}

/// Points of the orbit strictly inside `I_n`, as orbit indices, must be
/// `q_n + j q_{n+1}` for `1 <= j <= a_{n+1}` once level `n+1` is drawn.
pub fn check_transition<T: Real>(orbit: &OrbitTable<T>, theta: &RotationNumber<T>, n: usize) -> bool {
    let (qn, qn1, qn2) = (theta.q(n), theta.q(n + 1), theta.q(n + 2));
    let total = (qn1 + qn2) as usize;
    if orbit.len() < total {
        return false;
    }
    let end = orbit.offset(qn as usize);
    let ahead = n.is_multiple_of(2);
    let inside = |j: usize| {
        let o = orbit.offset(j);
        if o.is_zero() {
            return false;
        }
        if ahead {
            o < end
        } else {
            o > end
        }
    };
    let mut found: Vec<u64> = (1..total).filter(|&j| j != qn as usize && inside(j)).map(|j| j as u64).collect();
    found.sort_unstable();
    let a = theta.quotient(n + 1);
    let want: Vec<u64> = (1..=a).map(|j| qn + j * qn1).collect();
    found == want
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelBound {
    pub level: usize,
    pub k: f64,
    pub worst_atom: usize,
    pub min_atom: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RealBoundsReport {
    pub levels: Vec<LevelBound>,
    pub global_max: f64,
    pub worst_level: usize,
    /// Max over the upper half of the levels is no larger than over the
    /// lower half (times 1.5); a crude stabilization indicator.
    pub stabilizes: bool,
}

pub fn real_bounds<T: Real>(ladder: &PartitionLadder<T>, n_min: usize, n_max: usize) -> RealBoundsReport {
    let levels: Vec<LevelBound> = ladder
        .levels
        .iter()
        .filter(|p| p.level >= n_min && p.level <= n_max)
        .map(|p| {
            let (k, at) = p.adjacent_ratio();
            LevelBound {
                level: p.level,
                k: k.as_f64(),
                worst_atom: at,
                min_atom: p.min_length().as_f64(),
            }
        })
        .collect();
    let (global_max, worst_level) = levels
        .iter()
        .fold((1.0, n_min), |(m, l), b| if b.k > m { (b.k, b.level) } else { (m, l) });
    let half = levels.len() / 2;
    let lo = levels[..half].iter().map(|b| b.k).fold(1.0, f64::max);
    let hi = levels[half..].iter().map(|b| b.k).fold(1.0, f64::max);
    RealBoundsReport {
        levels,
        global_max,
        worst_level,
        stabilizes: half == 0 || hi <= 1.5 * lo,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SIncrement {
    pub level: usize,
    pub s_n: f64,
    pub s_next: f64,
    pub increment: f64,
    /// `|I_n ∖ I_{n+2}| / |I_{n+2}|`.
    pub bound: f64,
}

/// `S_n` at consecutive levels with the one-step increment bound.
pub fn s_increments<T: Real>(ladder: &PartitionLadder<T>, theta: &RotationNumber<T>) -> Vec<SIncrement> {
    ladder
        .levels
        .windows(2)
        .filter(|w| (theta.q(w[0].level + 2) as usize) < ladder.orbit.len())
        .map(|w| {
            let n = w[0].level;
            let s_n = w[0].s_sum();
            let s_next = w[1].s_sum();
            let i_n = ladder.orbit.return_length(theta.q(n));
            let i_n2 = ladder.orbit.return_length(theta.q(n + 2));
            SIncrement {
                level: n,
                s_n: s_n.as_f64(),
                s_next: s_next.as_f64(),
                increment: (s_next - s_n).as_f64(),
                bound: ((i_n - i_n2) / i_n2).as_f64(),
            }
        })
        .collect()
}

/// Line `log|I_k| >= intercept + slope k` lying below every sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// `e^{slope}`; geometric decay needs `lambda < 1`.
    pub lambda: f64,
}

impl DecayFit {
    pub fn lower_log_length(&self, k: usize) -> f64 {
        self.intercept + self.slope * k as f64
    }
}

/// Least-squares slope of `(k, log len_k)`, intercept lowered until the line
/// is a lower envelope.
pub fn fit_decay(samples: &[(usize, f64)]) -> Option<DecayFit> {
    if samples.len() < 2 {
        return None;
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0 as f64).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.0 as f64 - mx) * (s.1.ln() - my)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.0 as f64 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = samples
        .iter()
        .map(|s| s.1.ln() - slope * s.0 as f64)
        .fold(f64::INFINITY, f64::min);
    Some(DecayFit {
        slope,
        intercept,
        lambda: slope.exp(),
    })
}

/// Max length ratio over intersecting atoms of two partitions of the same
/// level (based at different critical points).
pub fn comparability<T: Real>(p: &DynamicalPartition<T>, q: &DynamicalPartition<T>) -> f64 {
    // put both on a common coordinate: absolute position on [0, 1)
    let intervals = |d: &DynamicalPartition<T>| -> Vec<(f64, f64, f64)> {
        let mut v = Vec::with_capacity(d.len() + 1);
        for a in &d.atoms {
            let s = (d.c + a.start).fract_pos().as_f64();
            let l = a.length.as_f64();
            if s + l > 1.0 {
                v.push((s, 1.0, l));
                v.push((0.0, s + l - 1.0, l));
            } else {
                v.push((s, s + l, l));
            }
        }
        v.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite"));
        v
    };
    let a = intervals(p);
    let b = intervals(q);
    let (mut i, mut j) = (0, 0);
    let mut worst = 1f64;
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            let r = a[i].2 / b[j].2;
            worst = worst.max(r.max(1.0 / r));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle_maps::CircleMapModel;

    #[test]
    fn rigid_golden_two_lengths() {
        let theta = RotationNumber::<f64>::golden(40);
        let m = CircleMapModel::rigid(theta.value());
        let p = build_partition(&m, 0.0, &theta, 3).unwrap();
        assert_eq!(p.len(), (theta.q(3) + theta.q(4)) as usize);
        let (w3, w4) = (theta.distance(3), theta.distance(4));
        for a in &p.atoms {
            let want = match a.generation {
                Generation::Long => w3,
                Generation::Short => w4,
            };
            assert!((a.length - want).abs() < 1e-14);
        }
        assert_eq!(p.count(Generation::Long), theta.q(4) as usize);
    }

    #[test]
    fn degenerate_level_has_empty_s_sum() {
        let theta = RotationNumber::<f64>::golden(10);
        let m = CircleMapModel::rigid(theta.value());
        let p = build_partition(&m, 0.0, &theta, 0).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.s_sum(), 0.0);
    }

    #[test]
    fn transition_points() {
        let theta = RotationNumber::<f64>::bounded_type(3, 20);
        let m = CircleMapModel::rigid(theta.value());
        let ladder = PartitionLadder::build(&m, 0.0, &theta, 1, 5).unwrap();
        for n in 1..5 {
            assert!(check_transition(&ladder.orbit, &theta, n), "n={n}");
        }
    }

    #[test]
    fn decay_fit_is_a_lower_envelope() {
        let samples: Vec<(usize, f64)> = (0..10).map(|k| (k, 0.5f64.powi(k as i32) * (1.0 + 0.1 * (k % 2) as f64))).collect();
        let fit = fit_decay(&samples).unwrap();
        assert!(fit.lambda < 1.0);
        for (k, l) in samples {
            assert!(fit.lower_log_length(k) <= l.ln() + 1e-12);
        }
    }
}
