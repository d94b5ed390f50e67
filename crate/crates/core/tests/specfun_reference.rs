use dcor_core::specfun::*;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// mpmath, 40 digits
const LN_GAMMA: [(f64, f64); 6] = [
    (1e-10, 23.025850929882735),
    (0.1, 2.252_712_651_734_206),
    (3.7, 1.428_072_326_665_388),
    (171.5, 709.143_163_030_928_2),
    (1e5, 1051287.7089736569),
    (1e7, 151_180_949.369_473_9),
];

#[test]
fn ln_gamma_values() {
    assert_eq!(ln_gamma(1.0).unwrap(), 0.0);
    assert!((ln_gamma(0.5).unwrap() - std::f64::consts::PI.sqrt().ln()).abs() < 1e-15);
    assert!(rel(ln_gamma(10.0).unwrap(), 362880f64.ln()) < 1e-15);
    for (x, want) in LN_GAMMA {
        assert!(rel(ln_gamma(x).unwrap(), want) < 1e-13, "x = {x}");
    }
    assert!(ln_gamma(0.0).is_err());
    assert!(ln_gamma(-1.5).is_err());
    assert!(ln_gamma(f64::NAN).is_err());
}

#[test]
fn rising_and_double_factorials() {
    assert_eq!(rising_factorial(3.0, 0).to_real(), 1.0);
    assert!(rel(rising_factorial(0.5, 3).to_real(), 1.875) < 1e-15);
    assert!(rising_factorial(-2.0, 4).is_zero());
    assert!(rel(rising_factorial(-2.5, 3).to_real(), -2.5 * -1.5 * -0.5) < 1e-15);
    assert_eq!(double_factorial(-1).unwrap().to_real(), 1.0);
    assert_eq!(double_factorial(0).unwrap().to_real(), 1.0);
    assert!(rel(double_factorial(7).unwrap().to_real(), 105.0) < 1e-15);
    assert!(rel(double_factorial(8).unwrap().to_real(), 384.0) < 1e-15);
    assert!(double_factorial(-2).is_err());
}

#[test]
fn terminating_2f1_examples() {
    assert_eq!(gauss_2f1_terminating(0, 0.3, 7.0, 2.0).unwrap(), 1.0);
    assert!(gauss_2f1_terminating(1, 1.5, 3.0, 2.0).unwrap().abs() < 1e-16);
    let x0 = 0.008_972_923_306_629_913;
    assert!(rel(gauss_2f1_terminating(5, -3.7, -11.4, 2.0).unwrap(), x0) < 1e-12);
    assert!(gauss_2f1_terminating(3, 1.0, -1.0, 2.0).is_err());
}

#[test]
fn disc_and_gauss_values() {
    assert_eq!(gauss_2f1_disc(0.3, 0.4, 0.5, 0.0).unwrap(), 1.0);
    for r in [0.5f64, 0.9] {
        let want = r * r.asin() + (1.0 - r * r).sqrt();
        assert!(
            rel(gauss_2f1_disc(-0.5, -0.5, 0.5, r * r).unwrap(), want) < 1e-12,
            "r = {r}"
        );
    }
    for (a, b, c, z, want) in [
        (0.5, 1.5, 2.5, 0.9, 1.6673034691845802),
        (-0.5, -0.5, 1.5, 0.49, 1.0839239333154606),
        (1.2, 0.7, 3.1, -0.8, 0.838_418_004_524_322_6),
    ] {
        assert!(rel(gauss_2f1_disc(a, b, c, z).unwrap(), want) < 1e-12);
    }
    assert!(
        rel(
            gauss_2f1_at_one(-0.5, -0.5, 0.5).unwrap(),
            std::f64::consts::FRAC_PI_2
        ) < 1e-14
    );
    assert_eq!(gauss_2f1_at_one(0.0, 2.0, 3.0).unwrap(), 1.0);
    assert!(
        rel(
            gauss_2f1_at_one(-0.5, -0.5, 5.0).unwrap(),
            1.0511845150385944
        ) < 1e-13
    );
    assert!(gauss_2f1_at_one(1.0, 1.0, 1.5).is_err());
}

#[test]
fn kummer_values() {
    assert_eq!(kummer_1f1(0.7, 1.3, 0.0).unwrap(), 1.0);
    assert!(rel(kummer_1f1(2.5, 2.5, -3.0).unwrap(), (-3.0f64).exp()) < 1e-13);
    assert!(rel(kummer_1f1(0.5, 1.0, -4.0).unwrap(), 0.30850832255367104) < 1e-11);
    for (a, b, z, want) in [
        (1.5, 2.25, 10.0, 4_810.041_421_122_869),
        (0.3, 1.0, -50.0, 0.23867696136499888),
        (2.0, 3.5, 150.0, 2.496012752623672e62),
        (-0.5, 0.5, -200.0, 25.066282746310005),
    ] {
        assert!(
            rel(kummer_1f1(a, b, z).unwrap(), want) < 1e-11,
            "({a}, {b}, {z})"
        );
    }
}

#[test]
fn double_factorial_product_is_factorial() {
    for k in 1..=80i64 {
        let lhs = double_factorial(2 * k).unwrap().log_magnitude()
            + double_factorial(2 * k - 1).unwrap().log_magnitude();
        let rhs = ln_factorial(2 * k as u64);
        assert!(rel(lhs, rhs) < 1e-12, "k = {k}");
    }
}

fn exact_terminating(m: u64, b: f64, c: f64) -> f64 {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::ToPrimitive;
    let q = |x: f64| BigRational::from_float(x).unwrap();
    let int = |i: u64| BigRational::from_integer(BigInt::from(i));
    let (b, c, two) = (q(b), q(c), int(2));
    let mut t = int(1);
    let mut sum = t.clone();
    for i in 0..m {
        t = t * (int(i) - int(m)) * (&b + int(i)) * &two / ((&c + int(i)) * int(i + 1));
        sum += &t;
    }
    sum.to_f64().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn rising_factorial_step(a in -40.0f64..40.0, n in 0u64..300) {
        let lhs = rising_factorial(a, n + 1);
        let rhs = rising_factorial(a, n).mul_real(a + n as f64);
        if rhs.is_zero() {
            prop_assert!(lhs.is_zero());
        } else {
            let ratio = (lhs / rhs).to_real();
            prop_assert!((ratio - 1.0).abs() < 1e-13, "a = {}, n = {}, ratio = {}", a, n, ratio);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn disc_parameter_symmetry(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.1f64..6.0, z in -0.9f64..0.9) {
        prop_assert_eq!(gauss_2f1_disc(a, b, c, z), gauss_2f1_disc(b, a, c, z));
    }

    #[test]
    fn terminating_at_two_matches_exact(m in 0u64..=100, b in -60.0f64..60.0, c in -60.0f64..60.0) {
        prop_assume!((0..m).all(|i| (c + i as f64).abs() > 1e-3));
        let want = exact_terminating(m, b, c);
        let got = gauss_2f1_terminating(m, b, c, 2.0).unwrap();
        let err = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        prop_assert!(err < 1e-9, "m = {}, b = {}, c = {}: {} vs {}", m, b, c, got, want);
    }

    #[test]
    fn kummer_contiguous(a in 0.6f64..8.0, b in 0.5f64..8.0, z in -60.0f64..60.0) {
        let f = |a| kummer_1f1(a, b, z).unwrap();
        let (fm, f0, fp) = (f(a - 1.0), f(a), f(a + 1.0));
        let terms = [(b - a) * fm, (2.0 * a - b + z) * f0, -a * fp];
        let scale = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);
        let residual = terms.iter().sum::<f64>().abs();
        prop_assert!(residual <= 1e-9 * scale, "({}, {}, {}): {}", a, b, z, residual / scale);
    }

    #[test]
    fn signed_log_round_trip(mantissa in 1.0f64..10.0, exp in -299i32..300, neg in any::<bool>()) {
        let x = if neg { -mantissa } else { mantissa } * 10f64.powi(exp);
        let y = SignedLogValue::from_real(x).to_real();
        prop_assert!((y - x).abs() <= x.abs() * f64::EPSILON, "{} -> {}", x, y);
    }
}
