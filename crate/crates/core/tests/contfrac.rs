use critlab::contfrac::*;
use critlab::{Dd, Real, Rational};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn rational(p: u64, q: u64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Euclid on exact rationals, written out independently of the library.
fn euclid(mut num: u64, mut den: u64) -> Vec<u64> {
    let mut out = Vec::new();
    while num != 0 {
        out.push(den / num);
        let r = den % num;
        den = num;
        num = r;
    }
    out
}

#[test]
fn golden_and_silver_quotients() {
    let golden = (Dd::of(5.0).sqrt() - Dd::one()) / Dd::of(2.0);
    let cf = expand(golden, 10).unwrap();
    assert_eq!(cf.quotients(), &[1; 10]);
    let silver = Dd::of(2.0).sqrt() - Dd::one();
    assert_eq!(expand(silver, 6).unwrap().quotients(), &[2; 6]);
}

#[test]
fn decimal_three_tenths_is_rational() {
    let cf = expand(0.3f64, 40).unwrap();
    assert_eq!(cf.termination(), Termination::Rational);
    assert_eq!(cf.quotients(), euclid(3, 10).as_slice());
    assert_eq!(cf.quotients(), &[3, 3]);
}

#[test]
fn denominators() {
    let g = convergents(&ContinuedFraction::new(vec![1; 12]).unwrap());
    let fibs: Vec<u64> = (0..=12).map(|n| g.q(n)).collect();
    assert_eq!(fibs, [1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233]);
    let s = convergents(&ContinuedFraction::new(vec![2; 6]).unwrap());
    let (mut a, mut b) = (0u64, 1u64);
    for n in 0..=6 {
        assert_eq!(s.q(n), b);
        (a, b) = (b, 2 * b + a);
    }
    assert_eq!(s.q(4), 29);
}

fn test_irrationals() -> Vec<(&'static str, RotationNumber<Dd>)> {
    let pi_minus_3 = Dd::pi() - Dd::of(3.0);
    // an arbitrary digit string, fixed for reproducibility
    let random: Dd = "0.7182904511732053925576319402683081".parse().unwrap();
    vec![
        ("golden", RotationNumber::golden(40)),
        ("silver", RotationNumber::silver(40)),
        (
            "e-2",
            RotationNumber::from_quotient_fn(40, |i| match i {
                0 => 1,
                i if i % 3 == 1 => 2 * (i as u64 / 3 + 1),
                _ => 1,
            }),
        ),
        ("pi-3", RotationNumber::from_value(pi_minus_3, 26).unwrap()),
        ("random", RotationNumber::from_value(random, 26).unwrap()),
    ]
}

#[test]
fn two_sided_bound_on_mixed_irrationals() {
    for (name, theta) in test_irrationals() {
        let checks = check_convergent_bounds(theta.value(), theta.convergents()).unwrap();
        let resolvable: Vec<_> = checks.iter().filter(|c| c.resolvable && c.n <= 25).collect();
        assert!(resolvable.len() >= 10, "{name}: only {} resolvable", resolvable.len());
        for c in resolvable {
            assert!(c.passed(), "{name} n={} margins {} {}", c.n, c.lower_margin, c.upper_margin);
        }
    }
}

#[test]
fn pi_quotients_are_classical() {
    let theta = RotationNumber::from_value(Dd::pi() - Dd::of(3.0), 12).unwrap();
    assert_eq!(&theta.continued_fraction().quotients()[..8], &[7, 15, 1, 292, 1, 1, 1, 2]);
}

#[test]
fn rational_rejected_by_bound_check() {
    let cf = expand(0.375f64, 20).unwrap();
    let err = check_convergent_bounds(0.375f64, &convergents(&cf)).unwrap_err();
    assert!(matches!(err, critlab::Error::RationalInput { p: 3, q: 8 }));
}

#[test]
fn golden_distances_are_powers() {
    let theta = RotationNumber::<Dd>::golden(60);
    let g = theta.value();
    for n in 0..40 {
        let oracle = g.powi(n as i32 + 1);
        let rel = ((theta.distance(n) - oracle) / oracle).abs();
        assert!(rel.hi() < 1e-28, "n={n} rel={}", rel.hi());
    }
}

#[test]
fn double_expansion_reaches_moderate_depth() {
    let silver = 2f64.sqrt() - 1.0;
    let cf = expand(silver, 18).unwrap();
    assert_eq!(cf.quotients(), &[2; 18]);
}

#[test]
fn q_grows_at_least_like_fibonacci() {
    for (_, theta) in test_irrationals() {
        for n in 0..=25 {
            assert!(theta.q(n) >= fib(n));
        }
    }
}

proptest! {
    #[test]
    fn determinant_and_coprimality(qs in prop::collection::vec(1u64..60, 1..24)) {
        let conv = convergents(&ContinuedFraction::new(qs).unwrap());
        for w in conv.items.windows(2) {
            let d = w[1].p as i128 * w[0].q as i128 - w[0].p as i128 * w[1].q as i128;
            prop_assert_eq!(d.abs(), 1);
            prop_assert!(is_coprime(w[1].p, w[1].q));
        }
    }

    #[test]
    fn finite_fraction_reconstructs_convergent(qs in prop::collection::vec(1u64..40, 1..18)) {
        for n in 1..=qs.len() {
            let cf = ContinuedFraction::new(qs[..n].to_vec()).unwrap();
            let conv = convergents(&cf);
            if conv.truncated {
                break;
            }
            let last = conv.items.last().unwrap();
            prop_assert_eq!(cf.to_rational(), rational(last.p, last.q));
            prop_assert_eq!(convergent_rational(last), cf.to_rational());
        }
    }

    #[test]
    fn exact_rational_roundtrip(p in 1u64..100_000, q in 2u64..100_000) {
        prop_assume!(p < q);
        let x = rational(p, q);
        let qs = expand_rational(&x);
        prop_assert_eq!(&qs, &euclid(p, q));
        let back = ContinuedFraction::new(qs).unwrap().to_rational();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn bounded_type_bounds_hold(a in 1u64..8) {
        let theta = RotationNumber::<Dd>::bounded_type(a, 30);
        for c in check_convergent_bounds(theta.value(), theta.convergents()).unwrap() {
            if c.resolvable {
                prop_assert!(c.passed());
            }
        }
        for n in 0..20 {
            let w = theta.distance(n);
            prop_assert!(!w.is_zero() && w < Dd::one());
        }
    }
}
