use std::sync::OnceLock;

use critlab::unimodal::*;
use critlab::{Error, Tower64, Unimodal64};
use proptest::prelude::*;

// regressions frozen from the first verified run (depth-14 search, depth-12 tower)
const SCALING_RATIO: f64 = 2.502_907_8;
const PROP_C0: f64 = 3.148_537_397_377_531_5;
const ENTRANCE_LOWER: f64 = 2.073_946_027_157_32;
const SULLIVAN_TAU: f64 = 0.34;
const DISTORTION_K1: f64 = 1.118_331_134_574_578_8;
// over every pair 1 <= j <= k <= q_n, levels 3..=7, five samples per interval
const DISTORTION_K1_PAIRS: f64 = 1.173_037_021_838_125_2;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * b.abs()
}

fn search() -> &'static FeigenbaumSearch {
    static S: OnceLock<FeigenbaumSearch> = OnceLock::new();
    S.get_or_init(|| feigenbaum_search::<f64>(14).unwrap())
}

fn tower() -> &'static Tower64 {
    static T: OnceLock<Tower64> = OnceLock::new();
    T.get_or_init(|| build_tower(&Unimodal64::family(search().t_inf), 12).unwrap())
}

#[test]
fn family_basics() {
    let f = Unimodal64::family(1.4);
    assert_eq!(f.eval(0.0), 1.0);
    assert_eq!(f.deriv(0.0), 0.0);
    assert_eq!(f.criticality(), 2);
    assert!(f.evenness_defect(1000) <= 1e-12);
    for i in 0..=100 {
        let x = -1.0 + i as f64 / 50.0;
        assert!(f.eval(x).abs() <= 1.0);
    }
}

#[test]
fn attracting_fixed_point_is_not_renormalizable() {
    let err = detect_period(&Unimodal64::family(0.5), DEFAULT_P_MAX).unwrap_err();
    assert_eq!(err, Error::NotRenormalizable(DEFAULT_P_MAX));
}

#[test]
fn superstable_period_two() {
    // f_t^2(0) = 1 - t vanishes at t = 1: λ is exactly zero there
    assert!(matches!(
        detect_period(&Unimodal64::family(1.0), DEFAULT_P_MAX),
        Err(Error::PrecisionExhausted(_))
    ));
    for t in [1.0 + 1e-6, 1.05, 1.2] {
        let p = detect_period(&Unimodal64::family(t), DEFAULT_P_MAX).unwrap();
        assert_eq!(p.p, 2, "t={t}");
        assert!((p.lambda - (1.0 - t)).abs() < 1e-15);
    }
}

#[test]
fn renormalization_is_normalized_and_even() {
    let f = Unimodal64::family(search().t_inf);
    let g = renormalize(&f).unwrap();
    assert!((g.eval(0.0) - 1.0).abs() <= 1e-10);
    assert!(g.evenness_defect(1000) <= 1e-12);
    let g2 = renormalize(&g).unwrap();
    assert_eq!(g2.q(), 4);
    for i in 0..=40 {
        let x = -1.0 + i as f64 / 20.0;
        assert!((g2.eval(x) - renormalize_once(&g, 2, x)).abs() <= 1e-8);
    }
}

#[test]
fn feigenbaum_ratios() {
    let s = search();
    assert_eq!(s.superstable[1], 1.0);
    let d8 = s.ratio(8).unwrap();
    let ext = s.aitken(8).unwrap();
    assert!((d8 - ext).abs() <= 0.01 * ext, "{d8} vs {ext}");
    assert!((s.extrapolated_ratio - 4.669).abs() < 0.01);
    let (lo, hi) = s.bracket;
    assert!(lo < s.t_inf && s.t_inf < hi);
    assert!(s.superstable.windows(2).all(|w| w[0] < w[1]));
    assert!(feigenbaum_search::<f64>(2).is_err());
}

#[test]
fn tower_invariants() {
    let tw = tower();
    assert!(tw.truncated.is_none());
    assert_eq!(tw.depth(), 12);
    for n in 1..=tw.depth() {
        let l = tw.level(n);
        assert_eq!(l.period, 2);
        assert_eq!(l.q, 1 << n);
        assert!(l.q >= 1 << n);
        assert!(l.lambda_identity_defect <= 1e-8);
        let m = tw.measure(n);
        assert!((m.total() - 1.0).abs() < 1e-15);
        if n < tw.depth() {
            assert_eq!(tw.a(n), 2);
            assert!((m.weight - tw.a(n) as f64 * tw.measure(n + 1).weight).abs() < 1e-18);
        }
        // pairwise disjoint and nested
        let mut v = l.intervals.clone();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(v.windows(2).all(|w| w[0].1 < w[1].0));
        if n > 0 {
            let prev = tw.level(n - 1);
            for &(a, b) in &l.intervals {
                let k = prev.locate(0.5 * (a + b)).unwrap();
                let (pa, pb) = prev.intervals[k];
                assert!(pa <= a && b <= pb);
            }
        }
    }
}

#[test]
fn bounded_geometry() {
    let ratios = tower().scaling_ratios();
    for r in &ratios[6..] {
        assert!((r - SCALING_RATIO).abs() < 1e-5, "{r}");
    }
    // central interval is the largest
    for n in 0..=tower().depth() {
        assert!(tower().central_dominance(n) >= 1.0 - 1e-12);
    }
}

#[test]
fn sullivan_space() {
    let grid: Vec<f64> = (1..=200).map(|i| i as f64 * 0.01).collect();
    let r = sullivan_space_check(tower(), &grid);
    assert_eq!(r.levels[0].1, Some(2.0));
    assert!((r.inf.unwrap() - SULLIVAN_TAU).abs() < 1e-12);
    // a smaller τ stays feasible
    let coarse = sullivan_space_check(tower(), &[0.1, 0.2]);
    assert_eq!(coarse.inf, Some(0.2));
}

#[test]
fn entrance_time_laws() {
    let tw = tower();
    let f = &tw.map;
    let v = entrance_times(tw, f.eval(0.0), tw.depth()).unwrap();
    for (n, &vn) in v.iter().enumerate() {
        assert_eq!(vn, tw.q(n) - 1);
    }
    assert!(entrance_times(tw, 0.0, tw.depth()).unwrap().iter().all(|&x| x == 0));
    let (a, b) = tw.level(8).intervals[77];
    let v = entrance_times(tw, 0.3 * a + 0.7 * b, 8).unwrap();
    assert!(v.windows(2).all(|w| w[1] >= w[0]));
    for (n, &vn) in v.iter().enumerate() {
        assert!(vn < tw.q(n));
    }
}

#[test]
fn escaping_point_is_reported() {
    // far outside every level-3 cylinder
    let tw = tower();
    let gap = {
        let mut v = tw.level(3).intervals.clone();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        0.5 * (v[0].1 + v[1].0)
    };
    assert!(matches!(entrance_times(tw, gap, 3), Err(Error::OrbitEscape { .. })));
}

#[test]
fn cylinder_fractions_are_one_half() {
    let tw = tower();
    for n in 0..tw.depth() {
        let c = cylinder_fraction(tw, n).unwrap();
        assert_eq!(c.coding_mismatches, 0);
        assert_eq!(2 * c.increased, c.total);
        assert!(c.equals_one_minus_inverse(tw.a(n)));
    }
}

#[test]
fn theorem_b_clauses() {
    let r = theorem_b_verify(tower(), 4096).unwrap();
    assert!(close(r.c0, PROP_C0), "{}", r.c0);
    assert!(close(r.entrance_lower, ENTRANCE_LOWER), "{}", r.entrance_lower);
    let cv: Vec<f64> = r.levels.iter().map(|l| l.critical_value_normalized).collect();
    assert!(cv.windows(2).all(|w| w[1].abs() < w[0].abs()));
    let at = |n: usize| r.levels.iter().find(|l| l.n == n).unwrap();
    assert!(at(10).critical_value_normalized.abs() < 0.05);
    assert!(at(10).max_abs_normalized < 0.05);
    let last = r.levels.last().unwrap();
    assert!(last.lower_series <= last.direct_integral && last.direct_integral <= last.upper_series);
    // both series converge: increments shrink geometrically
    let inc: Vec<f64> = r.levels.windows(2).map(|w| w[1].upper_series - w[0].upper_series).collect();
    assert!(inc[inc.len() - 1] < 1e-3 * inc[0]);

    let shallow = build_tower(&Unimodal64::family(search().t_inf), 4).unwrap();
    assert!(matches!(theorem_b_verify(&shallow, 100), Err(Error::LevelTooSmall { .. })));
}

#[test]
fn distortion_regressions() {
    let tw = tower();
    let d = distortion_check(tw, 5, 5, 6, 9).unwrap();
    assert!((d.min - 1.0).abs() < 1e-12 && (d.max - 1.0).abs() < 1e-12);
    let mut worst = 0f64;
    for n in [4, 6, 8] {
        let s = distortion_scan(tw, n, 9).unwrap();
        assert!(s.k1_adjacent <= s.k1);
        assert!(!s.adjacent.is_empty());
        worst = worst.max(s.k1);
    }
    assert!(close(worst, DISTORTION_K1), "{worst}");
    let mut pairs = 0f64;
    for n in 3..=7 {
        let q = tw.q(n);
        for j in 1..=q {
            for k in j..=q {
                pairs = pairs.max(distortion_check(tw, j, k, n, 5).unwrap().k1);
            }
        }
    }
    assert!(close(pairs, DISTORTION_K1_PAIRS), "{pairs}");
    assert!(distortion_check(tw, 0, 3, 4, 5).is_err());
    assert!(distortion_check(tw, 4, 3, 4, 5).is_err());
}

#[test]
fn adding_machine_frequencies() {
    let r = adding_machine_check(tower(), 6, 1_000_000).unwrap();
    assert!(r.max_deviation <= r.bound);
    assert!((r.bound - (2.0 / 64.0 + 1e-6)).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_distortion_triples(n in 3usize..11, a in 1u64..1000, b in 1u64..1000) {
        let q = tower().q(n);
        let (j, k) = (1 + a % q, 1 + b % q);
        let (j, k) = (j.min(k), j.max(k));
        let d = distortion_check(tower(), j, k, n, 5).unwrap();
        prop_assert!(d.k1 >= 1.0 && d.k1 <= DISTORTION_K1_PAIRS * (1.0 + 1e-6));
    }

    #[test]
    fn coded_increments_match_fraction(a in 2u64..7, q in 1u64..50, j in 0u64..50) {
        let j = j % q;
        let increased = (0..a).filter(|&k| coded_increment(j, k, a, q) > 0).count() as u64;
        // j = 0 has the single zero increment at k = 0; all other j at k = a - 1
        prop_assert_eq!(increased, a - 1);
    }

    #[test]
    fn family_is_even(t in 0.5f64..2.0, x in -1.0f64..1.0) {
        let f = Unimodal64::family(t);
        prop_assert!((f.eval(x) - f.eval(-x)).abs() <= 1e-12);
    }
}
