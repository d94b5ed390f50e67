use std::sync::OnceLock;

use dcor_core::empirical::{dcor_empirical, dcov2_empirical, SampleMatrix};
use dcor_core::population::*;
use dcor_core::series::{
    diagonal_partial_sums, eval_double_series, sum_by_rows, GammaConstant, SeriesOptions,
};
use dcor_core::CoefficientProvider;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn block(n: usize, dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n * dim)
}

fn samples() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, Vec<f64>)> {
    (5usize..40, 1usize..4, 1usize..4)
        .prop_flat_map(|(n, p, q)| (Just(n), Just(p), Just(q), block(n, p), block(n, q)))
}

fn orthogonal(dim: usize, seed: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(dim, dim, &seed[..dim * dim])
        .qr()
        .q()
}

/// Rows of `x` (n × dim, row-major) mapped through `m`.
fn transform(x: &[f64], dim: usize, m: &DMatrix<f64>) -> Vec<f64> {
    x.chunks(dim)
        .flat_map(|row| {
            (m * DVector::from_column_slice(row))
                .iter()
                .copied()
                .collect::<Vec<_>>()
        })
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn estimator_scaling((n, p, q, x, y) in samples(), a in 0.1f64..10.0, b in -10.0f64..-0.1) {
        let sm = SampleMatrix::new(n, p, q, x.clone(), y.clone()).unwrap();
        let scaled = SampleMatrix::new(n, p, q, x.iter().map(|v| a * v).collect(), y.iter().map(|v| b * v).collect()).unwrap();
        prop_assert!(close(dcov2_empirical(&scaled), a * b.abs() * dcov2_empirical(&sm), 1e-12));
    }

    #[test]
    fn estimator_translation((n, p, q, x, y) in samples(), sx in -50.0f64..50.0, sy in -50.0f64..50.0) {
        let sm = SampleMatrix::new(n, p, q, x.clone(), y.clone()).unwrap();
        let moved = SampleMatrix::new(n, p, q, x.iter().map(|v| v + sx).collect(), y.iter().map(|v| v + sy).collect()).unwrap();
        prop_assert!(close(dcov2_empirical(&moved), dcov2_empirical(&sm), 1e-12));
    }

    #[test]
    fn estimator_rotation((n, p, q, x, y) in samples(), seed in prop::collection::vec(-1.0f64..1.0, 9)) {
        let sm = SampleMatrix::new(n, p, q, x.clone(), y.clone()).unwrap();
        let rx = transform(&x, p, &orthogonal(p, &seed));
        let ry = transform(&y, q, &orthogonal(q, &seed));
        let rotated = SampleMatrix::new(n, p, q, rx, ry).unwrap();
        let (r0, r1) = (dcor_empirical(&sm).r, dcor_empirical(&rotated).r);
        prop_assert!((r0 - r1).abs() <= 1e-12, "{} vs {}", r0, r1);
    }

    #[test]
    fn normal_partial_sums_monotone(rho in -0.95f64..0.95) {
        let provider = HermiteProvider::new(move |j| rho.powi(j as i32));
        let sums = diagonal_partial_sums(&provider, 120).unwrap();
        prop_assert!(sums.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn normal_series_nondecreasing(a in 0.0f64..0.95, b in 0.0f64..0.95) {
        let (lo, hi) = (a.min(b), a.max(b));
        let v = |r| dcov2_bvn_series(r, 1e-12).unwrap().value;
        prop_assert!(v(lo) <= v(hi) + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gamma_partial_sums_monotone(alpha in 0.2f64..6.0, lambda in 0.05f64..0.9) {
        let provider = GammaProvider::new(alpha, alpha, lambda, 200);
        let sums = diagonal_partial_sums(&provider, 60).unwrap();
        prop_assert!(sums.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn diagonal_and_row_orders_agree(family in 0usize..4, x in 0.1f64..0.7) {
        let g = GammaConstant::new(1);
        let providers: Vec<Box<dyn CoefficientProvider>> = vec![
            Box::new(HermiteProvider::new(move |j| x.powi(j as i32))),
            Box::new(PoissonProvider::new(1.0 + x, x)),
            Box::new(NegBinProvider::new(1.0 + x, 0.3, x)),
            Box::new(GammaProvider::new(1.0 + x, 1.0 + x, x, 200)),
        ];
        let provider = providers[family].as_ref();
        let diag = eval_double_series(provider, g, g, SeriesOptions::default()).unwrap();
        let rows = sum_by_rows(provider, g, g, diag.max_index);
        prop_assert!((diag.value - rows).abs() <= diag.tail_bound.max(1e-12 * diag.value.abs()),
            "family {}: {} vs {} (tail {})", family, diag.value, rows, diag.tail_bound);
    }
}

const GAMMA_SHAPES: [f64; 3] = [0.5, 1.0, 3.0];

fn gamma_tables() -> &'static Vec<(GammaDiagonalTable, f64)> {
    static TABLES: OnceLock<Vec<(GammaDiagonalTable, f64)>> = OnceLock::new();
    TABLES.get_or_init(|| {
        GAMMA_SHAPES
            .iter()
            .map(|&a| {
                let t = GammaDiagonalTable::new(a, 1024).unwrap();
                let v = dvar_gamma_from_table(&t).value;
                (t, v)
            })
            .collect()
    })
}

fn valid_spec() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        (-0.99f64..0.99).prop_map(|r| DistributionSpec::bivariate_normal(r).unwrap()),
        (0.0f64..0.99).prop_map(|r| DistributionSpec::mixture_bvn(r).unwrap()),
        (
            1usize..3,
            1usize..3,
            prop::collection::vec(-1.0f64..1.0, 4),
            0.0f64..0.9
        )
            .prop_map(|(p, q, v, norm)| {
                let m = DMatrix::from_column_slice(p, q, &v[..p * q]);
                let s = spectral_norm(&m);
                let m = if s > 0.0 { m * (norm / s) } else { m };
                DistributionSpec::multivariate_normal(m).unwrap()
            }),
        (0.05f64..5.0, 0.0f64..=1.0)
            .prop_map(|(a, l)| DistributionSpec::bivariate_poisson(a, l).unwrap()),
        (0.2f64..4.0, 0.05f64..0.8, 0.0f64..0.95)
            .prop_map(|(b, c, l)| DistributionSpec::bivariate_negbinomial(b, c, l).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(850))]

    #[test]
    fn correlation_in_unit_interval(spec in valid_spec()) {
        let s = dcor(&spec, 1e-10).unwrap();
        let r = s.r.unwrap();
        prop_assert!((0.0..=1.0).contains(&r), "{:?}: r = {}", spec, r);
        prop_assert!(s.v2_xy >= 0.0 && s.v2_xx > 0.0 && s.v2_yy > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn gamma_correlation_in_unit_interval(which in 0usize..3, lambda in 0.0f64..1.0) {
        let (table, dvar) = &gamma_tables()[which];
        let v = table.dcov2(lambda).value;
        let r = dcor_from_components(v, *dvar, *dvar);
        prop_assert!(v >= 0.0 && (0.0..=1.0).contains(&r), "alpha {}: r({}) = {}", table.alpha, lambda, r);
    }
}

#[test]
fn gamma_dispatch_in_unit_interval() {
    for (alpha, lambda) in [(0.7, 0.2), (2.0, 0.85), (1.2, 0.95)] {
        let s = dcor(
            &DistributionSpec::bivariate_gamma(alpha, alpha, lambda).unwrap(),
            1e-10,
        )
        .unwrap();
        let r = s.r.unwrap();
        assert!((0.0..=1.0).contains(&r), "({alpha}, {lambda}): {r}");
    }
}

#[test]
fn dependence_zero_gives_zero() {
    assert_eq!(dcov2_bvn_series(0.0, 1e-12).unwrap().value, 0.0);
    assert_eq!(dcov2_gamma(2.0, 1.0, 0.0, 1e-12).unwrap().value, 0.0);
    assert_eq!(dcov2_poisson(3.0, 0.0, 1e-12).unwrap().value, 0.0);
    assert_eq!(dcov2_negbinomial(2.0, 0.5, 0.0, 1e-12).unwrap().value, 0.0);
    assert_eq!(
        dcov2_mvn_general(&DMatrix::zeros(3, 2), Default::default())
            .unwrap()
            .value,
        0.0
    );
}
