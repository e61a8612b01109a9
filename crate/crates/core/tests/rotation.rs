use critlab::circle_maps::{CircleMap, Family};
use critlab::contfrac::{expand, RotationNumber};
use critlab::rotation::*;
use critlab::{Dd, Map64};
use proptest::prelude::*;

fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

fn tuned(fam: Family, theta: &RotationNumber<f64>, tol: f64) -> Tuned<f64> {
    tune_parameter(|w| fam.build(w), theta, tol, None).unwrap()
}

#[test]
fn rigid_estimate_collapses() {
    let m = Map64::rigid(0.3);
    let e = estimate_rho(&m, 0.7, 10_000, true);
    assert!((e.value - 0.3).abs() < 1e-12);
    assert_eq!(e.lower, e.upper);
    assert_eq!(e.error_bound, 0.0);
}

#[test]
fn golden_arnold_estimate_within_bracket() {
    let theta = RotationNumber::<f64>::golden(45);
    let t = tuned(Family::Arnold, &theta, 1e-12);
    let m = Map64::arnold_critical(t.omega);
    let e = estimate_rho(&m, 0.123, 1_000_000, true);
    assert_eq!(e.method, Method::LiftAverage);
    assert!(e.upper - e.lower <= 2e-6 + 1e-15);
    assert!((e.value - golden()).abs() <= 2e-6);
    assert!(e.contains(golden()));
}

#[test]
fn zero_parameter_has_fixed_point() {
    let m = Map64::arnold_critical(0.0);
    let e = estimate_rho(&m, 0.4, 5000, true);
    assert!(e.lower <= 0.0 && 0.0 <= e.upper);
    assert_eq!(e.rational, Some((0, 1)));
    assert_eq!(e.value, 0.0);
}

#[test]
fn closest_returns_of_golden_arnold() {
    let theta = RotationNumber::<f64>::golden(45);
    let t = tuned(Family::Arnold, &theta, 1e-12);
    let m = Map64::arnold_critical(t.omega);
    let r = detect_closest_returns(&m, 0.0, 100_000);
    let fib: Vec<u64> = (1..=theta.max_level()).map(|n| theta.q(n)).filter(|&q| q <= 100_000).collect();
    assert_eq!(r.times, fib);
    assert!(r.sides_alternate());
    assert!(!r.rational_suspected);
    assert!(r.quotients().iter().all(|&a| a == 1));
}

#[test]
fn closest_returns_of_silver_rotation() {
    let m = Map64::rigid(2f64.sqrt() - 1.0);
    let r = detect_closest_returns(&m, 0.0, 30);
    assert_eq!(r.times, [1, 2, 5, 12, 29]);
    assert!(r.sides_alternate());
    assert_eq!(r.quotients(), [2, 2, 2, 2]);
}

#[test]
fn returns_past_one_half() {
    // θ = 1 - golden has a_0 = 2, q_1 = 2
    let m = Map64::rigid(1.0 - golden());
    let r = detect_closest_returns(&m, 0.0, 2000);
    let cf = expand(1.0 - golden(), 12).unwrap();
    let q = r.quotients();
    let k = q.len().min(cf.depth());
    assert!(k >= 8);
    assert_eq!(&q[..k], &cf.quotients()[..k]);
    assert_eq!(q[0], 2);
}

#[test]
fn quotients_agree_with_expansion_of_estimate() {
    let theta = RotationNumber::<f64>::silver(30);
    let t = tuned(Family::Blaschke, &theta, 1e-12);
    let m = Map64::blaschke_circle(t.omega);
    let r = detect_closest_returns(&m, 0.0, 200_000);
    let est = estimate_rho(&m, 0.0, 1_000_000, false);
    let cf = expand(est.value, 8).unwrap();
    let from_returns = r.quotients();
    // levels resolvable by the 1e-6 estimate
    assert_eq!(from_returns[..6], cf.quotients()[..6]);
}

#[test]
fn rigid_tuning_is_identity() {
    let theta = RotationNumber::<f64>::golden(40);
    let t = tuned(Family::Rigid, &theta, 1e-10);
    assert_eq!(t.omega, theta.value());
    assert_eq!(t.steps, 0);
}

#[test]
fn arnold_to_golden() {
    let theta = RotationNumber::<f64>::golden(45);
    let tol = 1e-8;
    let t = tuned(Family::Arnold, &theta, tol);
    assert!(t.bracket_width() <= tol);
    assert!(t.rho_lower <= golden() && golden() <= t.rho_upper);
    let m = Map64::arnold_critical(t.omega);
    assert!(matches!(
        compare_with_theta(&m, 0.0, &theta, t.level),
        Comparison::Inside(_)
    ));
    // idempotence
    let again = tune_parameter(|w| Family::Arnold.build(w), &theta, tol, Some((t.omega - tol, t.omega + tol))).unwrap();
    assert!((again.omega - t.omega).abs() <= tol);
}

#[test]
fn blaschke_to_silver() {
    let theta = RotationNumber::<f64>::silver(30);
    let t = tuned(Family::Blaschke, &theta, 1e-7);
    assert!(t.bracket_width() <= 1e-7);
    let m = Map64::blaschke_circle(t.omega);
    let est = estimate_rho(&m, 0.0, 200_000, false);
    assert!((est.value - theta.value()).abs() <= 1e-5);
}

#[test]
fn bicritical_tunes_in_double_double() {
    let theta = RotationNumber::<Dd>::golden(60);
    let fam = Family::Bicritical { c2: 0.25 };
    let t = tune_parameter(|w| fam.build(w), &theta, 1e-10, None).unwrap();
    let m = fam.build(t.omega).unwrap();
    let c = m.critical_points()[1].c;
    // the second critical point belongs to the same rotation class
    assert!(certified_level(&m, c, &theta, t.level).unwrap() + 1 >= t.level);
}

#[test]
fn bad_inputs() {
    let theta = RotationNumber::<f64>::golden(30);
    assert!(tune_parameter(|w| Family::Arnold.build(w), &theta, 0.0, None).is_err());
    assert!(tune_parameter(|w| Family::Arnold.build(w), &theta, 1e-6, Some((0.7, 0.6))).is_err());
    assert!(matches!(
        tune_parameter(|w| Family::Arnold.build(w), &theta, 1e-6, Some((0.0, 0.1))),
        Err(critlab::Error::InvalidArgument(_))
    ));
}

#[test]
fn stern_brocot_picks_smallest_denominator() {
    assert_eq!(simplest_rational_in(0.32, 0.34, 100), Some((1, 3)));
    assert_eq!(simplest_rational_in(0.6180, 0.6181, 1000), Some((89, 144)));
    assert_eq!(simplest_rational_in(0.6180, 0.6181, 100), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rigid_bracket_is_sound(omega in 0.001f64..0.999, n in 1u64..5000) {
        let m = Map64::rigid(omega);
        let e = estimate_rho(&m, 0.25, n, false);
        prop_assert!((e.value - omega).abs() <= 1e-12);
    }

    #[test]
    fn brackets_nest_consistently(omega in 0.0f64..1.0, n in 10u64..3000) {
        let m = Map64::arnold_critical(omega);
        let short = estimate_rho(&m, 0.0, n, false);
        let long = estimate_rho(&m, 0.0, 4 * n, false);
        prop_assert!(short.error_bound >= 0.0);
        prop_assert!(short.upper - short.lower <= 2.0 / n as f64 + 1e-12);
        prop_assert!(long.lower <= short.upper + 1e-12 && short.lower <= long.upper + 1e-12);
    }

    #[test]
    fn rho_monotone_in_omega(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let n = 4000;
        let r_lo = estimate_rho(&Map64::blaschke_circle(lo), 0.0, n, false);
        let r_hi = estimate_rho(&Map64::blaschke_circle(hi), 0.0, n, false);
        prop_assert!(r_lo.lower <= r_hi.upper);
    }
}
