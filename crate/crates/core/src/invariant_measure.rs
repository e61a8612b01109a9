//! The unique invariant measure `μ` seen through partitions: atom weights
//! from `θ` alone, the integral of `log Df` with a tail bound, and orbit
//! frequency checks.

use serde::Serialize;

use crate::circle_maps::CircleMap;
use crate::contfrac::RotationNumber;
use crate::error::{Error, Result};
use crate::partitions::{fit_decay, DecayFit, DynamicalPartition, Generation, OrbitTable, PartitionLadder};
use crate::quadrature::GaussLegendre;
use crate::scalar::Real;
use crate::sum::pairwise_sum;

/// `μ` of every atom of `P_n`, by generation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomMeasure<T> {
    pub level: usize,
    /// `|q_n θ - p_n|`.
    pub weight_long: T,
    /// `|q_{n+1} θ - p_{n+1}|`.
    pub weight_short: T,
    pub q_n: u64,
    pub q_next: u64,
}

impl<T: Real> AtomMeasure<T> {
    pub fn weight(&self, g: Generation) -> T {
        match g {
            Generation::Long => self.weight_long,
            Generation::Short => self.weight_short,
        }
    }

    /// `q_{n+1} w_long + q_n w_short - 1`.
    pub fn mass_defect(&self) -> T {
        T::from_u64_exact(self.q_next) * self.weight_long + T::from_u64_exact(self.q_n) * self.weight_short - T::one()
    }
}

pub fn atom_measure<T: Real>(theta: &RotationNumber<T>, level: usize) -> AtomMeasure<T> {
    AtomMeasure {
        level,
        weight_long: theta.distance(level),
        weight_short: theta.distance(level + 1),
        q_n: theta.q(level),
        q_next: theta.q(level + 1),
    }
}

/// `μ(I_k ∖ I_{k+2}) = a_{k+1} μ(I_{k+1})`.
pub fn annulus_measure<T: Real>(theta: &RotationNumber<T>, k: usize) -> T {
    T::from_u64_exact(theta.quotient(k + 1)) * theta.distance(k + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelEstimate {
    pub level: usize,
    /// `∫ log Df dμ` over the complement of `E_n`.
    pub value: f64,
    /// `∫ |log Df| dμ` over the complement of `E_n`.
    pub abs_value: f64,
    pub tail_bound: f64,
    pub quadrature_bound: f64,
}

impl LevelEstimate {
    pub fn total_bound(&self) -> f64 {
        self.tail_bound + self.quadrature_bound
    }

    pub fn within_bound(&self) -> bool {
        self.value.abs() <= self.total_bound()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AtomContribution {
    pub index: usize,
    pub generation: Generation,
    pub left: f64,
    pub right: f64,
    pub weight: f64,
    pub contribution: f64,
    pub abs_contribution: f64,
    pub quadrature_bound: f64,
    /// Smallest `n` of the history whose `E_n` does not cover this atom.
    pub first_included: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalTail {
    pub c: f64,
    pub c0: f64,
    pub decay: DecayFit,
    /// Number of measured `|I_k|` before the envelope takes over.
    pub measured_levels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralEstimate {
    /// Truncation level and its estimate (the last entry of `history`).
    pub level: usize,
    pub value: f64,
    pub abs_value: f64,
    pub tail_bound: f64,
    pub quadrature_bound: f64,
    pub quadrature_order: usize,
    /// Smallest level whose `J_n(c_j)` sit inside the power-law neighborhoods.
    pub power_law_level: usize,
    pub history: Vec<LevelEstimate>,
    pub tails: Vec<CriticalTail>,
    #[serde(skip)]
    pub atoms: Vec<AtomContribution>,
}

impl IntegralEstimate {
    pub fn total_bound(&self) -> f64 {
        self.tail_bound + self.quadrature_bound
    }

    /// `|value|` is nonincreasing along the history.
    pub fn monotone(&self) -> bool {
        self.history.windows(2).all(|w| w[1].value.abs() <= w[0].value.abs())
    }
}

/// Orbit data of one critical point: `|I_k(c)|` and the signed endpoints of
/// `J_n(c)`.
struct CriticalOrbit<T> {
    c: T,
    c0: f64,
    radius: f64,
    orbit: OrbitTable<T>,
    measured: usize,
}

impl<T: Real> CriticalOrbit<T> {
    fn i_len(&self, theta: &RotationNumber<T>, k: usize) -> T {
        self.orbit.return_length(theta.q(k))
    }

    /// `J_n(c)` as offsets from `c`: `(ahead, behind)` lengths.
    fn j_arc(&self, theta: &RotationNumber<T>, n: usize) -> (T, T) {
        let a = self.i_len(theta, n);
        let b = self.i_len(theta, n + 1);
        if n.is_multiple_of(2) {
            (a, b)
        } else {
            (b, a)
        }
    }
}

/// Sum of `C0 μ(I_k ∖ I_{k+2}) log(1/|I_{k+2}|)` for `k >= n`, measured where
/// available and on the fitted envelope beyond.
fn tail_series<T: Real>(theta: &RotationNumber<T>, co: &CriticalOrbit<T>, fit: &DecayFit, n: usize) -> f64 {
    let kmax = theta.max_level() - 2;
    let mut terms = Vec::new();
    for k in n..kmax {
        let mu = annulus_measure(theta, k).as_f64();
        let log_inv = if k + 2 <= co.measured {
            -co.i_len(theta, k + 2).as_f64().ln()
        } else {
            -fit.lower_log_length(k + 2)
        };
        terms.push(co.c0 * mu * log_inv);
    }
    // remainder past the stored quotients: weights beyond decay at least
    // like a geometric series of ratio 1/2 every two steps
    let w = theta.distance(kmax).as_f64();
    terms.push(co.c0 * 4.0 * w * (-fit.lower_log_length(kmax + 2)).max(0.0) * 2.0);
    pairwise_sum(&terms)
}

/// Integrates `log Df` against `μ` on the atoms of `P_L(c_1)`.
///
/// For each `n` from the power-law level up to `L`, the estimate omits the
/// atoms inside `E_n = ∪_j J_n(c_j)`; the omitted mass is controlled by the
/// tail series, and the non-affinity of the conjugacy inside each atom by
/// `μ(atom) · osc(log Df)`.
pub fn integrate_log_df<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    theta: &RotationNumber<T>,
    level: usize,
    quadrature_order: usize,
) -> Result<IntegralEstimate> {
    let crit = map.critical_points();
    let base = crit.first().map(|c| c.c).unwrap_or_else(T::zero);
    let ladder = PartitionLadder::build(map, base, theta, level, level)?;
    let fine = &ladder.levels[0];
    let measure = atom_measure(theta, level);

    // orbits of every critical point, long enough to measure |I_k| up to the
    // certified level
    let measured = ladder.certified.min(theta.max_level() - 1);
    let mut orbits = Vec::with_capacity(crit.len());
    for (j, cp) in crit.iter().enumerate() {
        let c0 = cp
            .power_law
            .log_constant(cp.d)
            .ok_or_else(|| Error::InvalidArgument("power-law neighborhood too large: B r^(d-1) > 1".into()))?;
        let orbit = if j == 0 {
            ladder.orbit.clone()
        } else {
            OrbitTable::new(map, cp.c, ladder.orbit.len())
        };
        let measured = (0..=measured)
            .take_while(|&k| (theta.q(k) as usize) < orbit.len())
            .last()
            .unwrap_or(0);
        orbits.push(CriticalOrbit {
            c: cp.c,
            c0,
            radius: cp.power_law.radius,
            orbit,
            measured,
        });
    }

    let power_law_level = if orbits.is_empty() {
        1
    } else {
        let last = theta.max_level().saturating_sub(2);
        (1..=last)
            .find(|&n| {
                orbits.iter().all(|co| {
                    let (a, b) = if (theta.q(n + 1) as usize) < co.orbit.len() {
                        co.j_arc(theta, n)
                    } else {
                        // past the shared orbit: only reached when reporting
                        // how far below the threshold `level` is
                        let longer = CriticalOrbit {
                            orbit: OrbitTable::new(map, co.c, theta.q(n + 1) as usize + 1),
                            ..*co
                        };
                        longer.j_arc(theta, n)
                    };
                    a.as_f64() <= co.radius && b.as_f64() <= co.radius
                })
            })
            .unwrap_or(last + 1)
    };
    if level < power_law_level {
        return Err(Error::LevelTooSmall {
            level,
            min: power_law_level,
        });
    }

    let mut tails = Vec::with_capacity(orbits.len());
    let mut fits = Vec::with_capacity(orbits.len());
    for co in &orbits {
        let samples: Vec<(usize, f64)> = (1..=co.measured).map(|k| (k, co.i_len(theta, k).as_f64())).collect();
        let fit = fit_decay(&samples).ok_or_else(|| Error::InvalidArgument("too few levels to fit decay".into()))?;
        if fit.lambda >= 1.0 {
            return Err(Error::TailUnbounded(fit.lambda));
        }
        tails.push(CriticalTail {
            c: co.c.as_f64(),
            c0: co.c0,
            decay: fit,
            measured_levels: co.measured,
        });
        fits.push(fit);
    }

    let rule = GaussLegendre::<T>::new(quadrature_order);
    let atoms = integrate_atoms(map, fine, &measure, &rule);

    let history_levels: Vec<usize> = (power_law_level..=level).collect();
    let mut history = Vec::with_capacity(history_levels.len());
    let mut first_included = vec![None; atoms.len()];
    for &n in &history_levels {
        let mut vals = Vec::with_capacity(atoms.len());
        let mut abs_vals = Vec::with_capacity(atoms.len());
        let mut quad = Vec::with_capacity(atoms.len());
        let mut boundary = Vec::new();
        let arcs: Vec<(T, T)> = orbits.iter().map(|co| co.j_arc(theta, n)).collect();
        for (k, (atom, q)) in fine.atoms.iter().zip(&atoms).enumerate() {
            match classify_atom(fine, atom, &orbits, &arcs) {
                Cover::Inside => continue,
                Cover::Boundary(phi_max) => {
                    boundary.push(q.weight * phi_max);
                    continue;
                }
                Cover::Outside => {}
            }
            if first_included[k].is_none() {
                first_included[k] = Some(n);
            }
            vals.push(q.contribution);
            abs_vals.push(q.abs_contribution);
            quad.push(q.quad_bound);
        }
        let mut tail = 0.0;
        for (co, fit) in orbits.iter().zip(&fits) {
            tail += tail_series(theta, co, fit, n);
        }
        tail += pairwise_sum(&boundary);
        history.push(LevelEstimate {
            level: n,
            value: pairwise_sum(&vals),
            abs_value: pairwise_sum(&abs_vals),
            tail_bound: tail,
            quadrature_bound: pairwise_sum(&quad),
        });
    }

    let last = *history.last().expect("nonempty history");
    let contributions = fine
        .atoms
        .iter()
        .zip(&atoms)
        .enumerate()
        .map(|(k, (a, q))| AtomContribution {
            index: k,
            generation: a.generation,
            left: a.left.as_f64(),
            right: a.right.as_f64(),
            weight: q.weight,
            contribution: q.contribution,
            abs_contribution: q.abs_contribution,
            quadrature_bound: q.quad_bound,
            first_included: first_included[k],
        })
        .collect();
    Ok(IntegralEstimate {
        level,
        value: last.value,
        abs_value: last.abs_value,
        tail_bound: last.tail_bound,
        quadrature_bound: last.quadrature_bound,
        quadrature_order,
        power_law_level,
        history,
        tails,
        atoms: contributions,
    })
}

struct AtomQuadrature {
    weight: f64,
    contribution: f64,
    abs_contribution: f64,
    quad_bound: f64,
}

fn integrate_atoms<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    fine: &DynamicalPartition<T>,
    measure: &AtomMeasure<T>,
    rule: &GaussLegendre<T>,
) -> Vec<AtomQuadrature> {
    let (ia, ib) = fine.base_atoms();
    fine.atoms
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let w = measure.weight(a.generation);
            if map.is_rigid() || k == ia || k == ib {
                // base atoms touch c and are excluded at every level
                return AtomQuadrature {
                    weight: w.as_f64(),
                    contribution: 0.0,
                    abs_contribution: 0.0,
                    quad_bound: 0.0,
                };
            }
            let mut s = T::zero();
            let mut sa = T::zero();
            let mut lo = T::of(f64::INFINITY);
            let mut hi = T::of(f64::NEG_INFINITY);
            let mut slope = T::zero();
            let mut sample = |x: T| {
                let df = map.deriv(x);
                let l = df.ln();
                lo = lo.min(l);
                hi = hi.max(l);
                slope = slope.max((map.deriv2(x) / df).abs());
                l
            };
            for (node, g) in rule.nodes.iter().zip(&rule.weights) {
                let l = sample(a.at(*node));
                s += *g * l;
                sa += *g * l.abs();
            }
            sample(a.at(T::zero()));
            sample(a.at(T::one()));
            let osc = (hi - lo).max(slope * a.length);
            AtomQuadrature {
                weight: w.as_f64(),
                contribution: (w * s).as_f64(),
                abs_contribution: (w * sa).as_f64(),
                quad_bound: (w * osc).as_f64(),
            }
        })
        .collect()
}

enum Cover {
    Inside,
    /// Meets some `J_n(c_j)` without lying inside it; carries `max φ`.
    Boundary(f64),
    Outside,
}

fn classify_atom<T: Real>(
    fine: &DynamicalPartition<T>,
    atom: &crate::partitions::Atom<T>,
    orbits: &[CriticalOrbit<T>],
    arcs: &[(T, T)],
) -> Cover {
    let mut cover = Cover::Outside;
    for (j, (co, &(ahead, behind))) in orbits.iter().zip(arcs).enumerate() {
        if j == 0 {
            // fine atoms tile J_n(c_1) exactly, compare offsets directly
            if atom.end <= ahead || atom.start >= T::one() - behind {
                return Cover::Inside;
            }
            continue;
        }
        // offsets relative to c_j
        let s = (fine.c + atom.start - co.c).fract_pos();
        let e = s + atom.length;
        let inside = (e <= ahead) || (s >= T::one() - behind && e <= T::one());
        if inside {
            return Cover::Inside;
        }
        let meets = s < ahead || e > T::one() - behind;
        if meets {
            // closest approach of the atom to c_j, outside J_n(c_j) at worst
            let gap = s.min(T::one() - e).max(T::epsilon());
            let phi = co.c0 * (-gap.as_f64().ln()).max(0.0);
            let phi = if let Cover::Boundary(p) = cover { p.max(phi) } else { phi };
            cover = Cover::Boundary(phi);
        }
    }
    cover
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub level: usize,
    pub orbit_length: u64,
    pub max_deviation: f64,
    /// `2 Σ b_k / M` for the Ostrowski digits `b_k` of `M`.
    pub koksma_bound: f64,
    pub max_deviation_over_weight: f64,
    /// Spread of frequencies within one generation.
    pub long_spread: f64,
    pub short_spread: f64,
    #[serde(skip)]
    pub frequencies: Vec<f64>,
    #[serde(skip)]
    pub weights: Vec<f64>,
}

impl FrequencyReport {
    pub fn within_koksma(&self) -> bool {
        self.max_deviation <= self.koksma_bound
    }
}

/// Ostrowski digits of `m` in the base `(q_k)`, greedy from the top.
pub fn ostrowski_digits<T: Real>(theta: &RotationNumber<T>, mut m: u64) -> Vec<u64> {
    let top = (0..=theta.max_level()).take_while(|&k| theta.q(k) <= m).last().unwrap_or(0);
    let mut digits = vec![0u64; top + 1];
    for k in (0..=top).rev() {
        let q = theta.q(k);
        digits[k] = m / q;
        m %= q;
    }
    digits
}

/// Visit frequencies of the orbit of `x0` in the atoms of `P_level(c)`.
pub fn empirical_measure_check<T: Real, M: CircleMap<T> + ?Sized>(
    map: &M,
    c: T,
    theta: &RotationNumber<T>,
    level: usize,
    x0: T,
    orbit_length: u64,
) -> Result<FrequencyReport> {
    let ladder = PartitionLadder::build(map, c, theta, level, level)?;
    let p = &ladder.levels[0];
    let measure = atom_measure(theta, level);
    let mut counts = vec![0u64; p.len()];
    let mut x = x0.fract_pos();
    for _ in 0..orbit_length {
        let s = (x - p.c).fract_pos();
        counts[p.locate(s)] += 1;
        x = map.apply(x);
    }
    let m = orbit_length as f64;
    let frequencies: Vec<f64> = counts.iter().map(|&k| k as f64 / m).collect();
    let weights: Vec<f64> = p.atoms.iter().map(|a| measure.weight(a.generation).as_f64()).collect();
    let mut max_dev = 0f64;
    let mut max_rel = 0f64;
    for (f, w) in frequencies.iter().zip(&weights) {
        max_dev = max_dev.max((f - w).abs());
        max_rel = max_rel.max((f - w).abs() / w);
    }
    let spread = |g: Generation| {
        let fs: Vec<f64> = p
            .atoms
            .iter()
            .zip(&frequencies)
            .filter(|(a, _)| a.generation == g)
            .map(|(_, &f)| f)
            .collect();
        let lo = fs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if fs.is_empty() {
            0.0
        } else {
            hi - lo
        }
    };
    let digits = ostrowski_digits(theta, orbit_length);
    let koksma = 2.0 * digits.iter().sum::<u64>() as f64 / m;
    Ok(FrequencyReport {
        level,
        orbit_length,
        max_deviation: max_dev,
        koksma_bound: koksma,
        max_deviation_over_weight: max_rel,
        long_spread: spread(Generation::Long),
        short_spread: spread(Generation::Short),
        frequencies,
        weights,
    })
}

/// Partial sums of `Σ (k+2)/q_{k+1}`.
pub fn majorant_partial_sums<T: Real>(theta: &RotationNumber<T>, kmax: usize) -> Vec<f64> {
    let mut s = 0.0;
    (0..=kmax)
        .map(|k| {
            s += (k as f64 + 2.0) / theta.q(k + 1) as f64;
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle_maps::CircleMapModel;
    use crate::dd::DoubleDouble as Dd;

    #[test]
    fn mass_identity_and_fact_three() {
        let theta = RotationNumber::<Dd>::golden(40);
        for n in 0..=20 {
            let am = atom_measure(&theta, n);
            assert!(am.mass_defect().abs().hi() < 1e-28);
            let lhs = theta.distance(n) - theta.distance(n + 2);
            assert!((lhs - annulus_measure(&theta, n)).abs().hi() < 1e-28);
            let qsum = (am.q_n + am.q_next) as f64;
            let w = am.weight_long.hi();
            assert!(1.0 / qsum < w && w <= 1.0 / am.q_next as f64);
        }
    }

    #[test]
    fn rigid_integral_vanishes() {
        let theta = RotationNumber::<f64>::golden(60);
        let m = CircleMapModel::rigid(theta.value());
        let est = integrate_log_df(&m, &theta, 8, 4).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.tail_bound, 0.0);
        assert_eq!(est.quadrature_bound, 0.0);
    }

    #[test]
    fn ostrowski_reconstructs() {
        let theta = RotationNumber::<f64>::golden(40);
        for m in [1u64, 7, 1000, 1_000_000] {
            let d = ostrowski_digits(&theta, m);
            let back: u64 = d.iter().enumerate().map(|(k, b)| b * theta.q(k)).sum();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn majorant_converges() {
        let theta = RotationNumber::<f64>::golden(60);
        let s = majorant_partial_sums(&theta, 50);
        assert!((s[50] - s[40]).abs() < 1e-6);
    }
}
