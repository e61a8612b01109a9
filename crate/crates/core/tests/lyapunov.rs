use std::sync::OnceLock;

use critlab::circle_maps::{CircleMap, Family};
use critlab::contfrac::RotationNumber;
use critlab::lyapunov::*;
use critlab::partitions::precision_ceiling;
use critlab::rotation::tune_parameter;
use critlab::{Error, Map64};
use proptest::prelude::*;

// regressions frozen from the first verified run, compared to 1e-6 relative
const LEMMA_IN_C_4_10: f64 = 3.160_741_833_071_279_3;
const DISTORTION_K1_3_20: f64 = 1.201_005_632_160_491_6;
const BICRITICAL_C_UPPER_4_8: f64 = 2.078_949_441_577_319_8;
const BICRITICAL_C_LOWER_4_8: f64 = 0.699_013_081_960_052_4;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * b.abs()
}

fn golden() -> &'static RotationNumber<f64> {
    static G: OnceLock<RotationNumber<f64>> = OnceLock::new();
    G.get_or_init(|| RotationNumber::golden(45))
}

fn tuned(fam: Family, theta: &RotationNumber<f64>) -> Map64 {
    let t = tune_parameter(|w| fam.build(w), theta, 1e-12, None).unwrap();
    fam.build(t.omega).unwrap()
}

fn arnold() -> &'static Map64 {
    static M: OnceLock<Map64> = OnceLock::new();
    M.get_or_init(|| tuned(Family::Arnold, golden()))
}

fn bicritical() -> &'static Map64 {
    static M: OnceLock<Map64> = OnceLock::new();
    M.get_or_init(|| tuned(Family::Bicritical { c2: 0.25 }, golden()))
}

#[test]
fn rigid_is_trivial_everywhere() {
    let theta = golden();
    let m = Map64::rigid(theta.value());
    let tr = subsequence_exponents(&m, theta, 0.2, &[3, 6, 9, 12]).unwrap();
    assert!(tr.entries.iter().all(|e| e.sum == Some(0.0) && e.normalized == Some(0.0)));
    assert_eq!(lemma_in_check(&m, theta, 5, 100).unwrap().c_n, 1.0);
    let mc = multicritical_bounds_check(&m, theta, 4, 100).unwrap();
    assert_eq!(mc.c_upper, 0.0);
    assert_eq!(mc.c_lower, 0.0);
    let ce = ce_diagnostic(&m, theta, 1000).unwrap();
    assert_eq!(ce.values[0].verdict, CeVerdict::CeTriviallyViolated);
}

#[test]
fn golden_arnold_exponent_at_critical_value() {
    let m = arnold();
    let fc = m.apply(0.0);
    let tr = subsequence_exponents(m, golden(), fc, &(3..=12).collect::<Vec<_>>()).unwrap();
    let vals: Vec<f64> = tr.entries.iter().map(|e| e.normalized.unwrap().abs()).collect();
    assert!(*vals.last().unwrap() < 0.05, "{vals:?}");
    let first_below = vals.iter().position(|&v| v < 0.05).unwrap();
    assert!(vals[first_below..].iter().all(|&v| v < 0.05));
    assert!(vals[vals.len() - 1] < vals[0]);
}

#[test]
fn base_point_on_critical_point_is_singular() {
    let tr = subsequence_exponents(arnold(), golden(), 0.0, &[3, 5]).unwrap();
    assert_eq!(tr.singular_at, Some(0));
    assert!(tr.entries.iter().all(|e| e.singular()));
    assert!(tr.last_finite().is_none());
}

#[test]
fn exponents_vanish_for_all_families() {
    for theta in [
        RotationNumber::<f64>::golden(45),
        RotationNumber::silver(30),
        RotationNumber::bounded_type(3, 26),
    ] {
        for fam in [Family::Arnold, Family::Blaschke, Family::Bicritical { c2: 0.25 }, Family::Bicritical { c2: 0.6 }] {
            let m = tuned(fam, &theta);
            let c = m.critical_points()[0].c;
            let top = precision_ceiling(&m, c, &theta, 40);
            let tr = subsequence_exponents(&m, &theta, m.apply(c), &[top]).unwrap();
            let v = tr.entries[0].normalized.unwrap();
            assert!(v.abs() <= 0.05, "{fam:?} top={top} v={v}");
        }
    }
}

#[test]
fn additivity_holds() {
    let m = arnold();
    for (x, a, b) in [(0.1, 1000, 2000), (0.77, 17, 50_000), (0.5, 89, 144)] {
        assert!(additivity_defect(m, x, a, b).unwrap() <= 1e-8);
    }
}

#[test]
fn lemma_in_regression() {
    let mut worst = 0f64;
    for n in 4..=10 {
        let r = lemma_in_check(arnold(), golden(), n, 400).unwrap();
        assert!(r.min > 0.0 && r.min <= r.max);
        assert!(r.c_n >= 1.0);
        worst = worst.max(r.c_n);
    }
    assert!(close(worst, LEMMA_IN_C_4_10), "C = {worst}");
}

#[test]
fn lemma_in_rejects_bicritical() {
    let err = lemma_in_check(bicritical(), golden(), 5, 50).unwrap_err();
    assert_eq!(err, Error::UnicriticalOnly(2));
}

#[test]
fn multicritical_regression() {
    let (mut up, mut low) = (0f64, 0f64);
    for n in 4..=8 {
        let r = multicritical_bounds_check(bicritical(), golden(), n, 200).unwrap();
        assert_eq!(r.avoiding + r.excluded, r.grid_size);
        assert!(r.excluded > 0 && r.avoiding > 0);
        assert!(r.c_upper > 0.0);
        up = up.max(r.c_upper);
        low = low.max(r.c_lower);
    }
    assert!(close(up, BICRITICAL_C_UPPER_4_8), "{up}");
    assert!(close(low, BICRITICAL_C_LOWER_4_8), "{low}");
}

#[test]
fn multicritical_needs_level_two_n() {
    let theta = RotationNumber::<f64>::bounded_type(3, 26);
    let m = tuned(Family::Bicritical { c2: 0.25 }, &theta);
    let err = multicritical_bounds_check(&m, &theta, 7, 100).unwrap_err();
    assert!(matches!(err, Error::NotCertified { level: 15, .. }), "{err}");
}

#[test]
fn ce_refuted_on_golden_arnold() {
    let theta = golden();
    let ce = ce_diagnostic(arnold(), theta, theta.q(28)).unwrap();
    let v = &ce.values[0];
    assert_eq!(v.verdict, CeVerdict::CeViolatedEvidence);
    assert_eq!(v.hits.len(), CE_THRESHOLDS.len());
    for h in &v.hits {
        assert!(h.level.unwrap() <= 12, "{h:?}");
    }
    assert!(v.singular_at.is_none());
    assert!(!v.liminf.is_empty() && !v.trace.is_empty());
}

#[test]
fn ce_needs_long_horizon() {
    let theta = golden();
    assert!(matches!(
        ce_diagnostic(arnold(), theta, theta.q(5) - 1),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn critical_value_landing_on_critical_point() {
    // F(0) = ω, so ω = c2 sends c1 straight onto c2
    let m = Map64::bicritical_trig(0.3, 0.3).unwrap();
    let ce = ce_diagnostic(&m, golden(), 1000).unwrap();
    let first = &ce.values[0];
    assert_eq!(first.singular_at, Some(0));
    assert_eq!(first.verdict, CeVerdict::CeTriviallyViolated);
}

#[test]
fn occupancy_exact() {
    let theta = RotationNumber::<critlab::Dd>::golden(60);
    let rows = full_measure_set_probe(&theta, 1..=20, 1);
    for r in &rows {
        assert_eq!(r.a_next, 1);
        assert_eq!(r.bound, 1.0 / 3.0);
        assert!(r.holds && r.measure > 1.0 / 3.0);
        assert!((r.measure - r.measure_direct).abs() <= 1e-15);
    }
    let multi = full_measure_set_probe(&theta, 1..=20, 2);
    for w in multi.windows(2) {
        assert!(w[1].q_mu_j2n < w[0].q_mu_j2n);
    }
    // geometric: ratio tends to θ
    let r = multi[19].q_mu_j2n / multi[18].q_mu_j2n;
    assert!((r - theta.value().hi()).abs() < 1e-3);
}

#[test]
fn occupancy_bound_for_larger_quotients() {
    let theta = RotationNumber::<f64>::from_quotient_fn(30, |i| [1, 3, 2, 5][i % 4]);
    for r in full_measure_set_probe(&theta, 1..=12, 1) {
        assert!(r.holds, "{r:?}");
        assert_eq!(r.bound, r.a_next as f64 / (r.a_next as f64 + 2.0));
    }
}

#[test]
fn distortion_regression() {
    let mut worst = 0f64;
    for n in 3..=20 {
        let r = distortion_check(arnold(), golden(), n, 200).unwrap();
        assert!(r.k1 >= 1.0);
        worst = worst.max(r.k1);
    }
    assert!(close(worst, DISTORTION_K1_3_20), "{worst}");
}

#[test]
fn stratified_sampling_clusters_at_ends() {
    let s = stratified_unit(200);
    assert!(s.windows(2).all(|w| w[0] < w[1]));
    assert!(s[1] < 1e-10 && 1.0 - s[s.len() - 2] < 1e-10);
    assert_eq!(s[0], 0.0);
    assert_eq!(*s.last().unwrap(), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn additivity_property(x in 0.0f64..1.0, m in 1u64..5000, k in 1u64..5000) {
        if let Ok(d) = additivity_defect(arnold(), x, m, k) {
            prop_assert!(d <= 1e-8);
        }
    }

    #[test]
    fn upper_bound_holds_off_grid(x in 0.0f64..1.0, n in 4usize..9) {
        let tr = subsequence_exponents(bicritical(), golden(), x, &[n]).unwrap();
        if let Some(s) = tr.entries[0].sum {
            prop_assert!(s <= BICRITICAL_C_UPPER_4_8 * 1.5);
        }
    }
}
