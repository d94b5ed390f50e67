use dcor_core::empirical::*;
use dcor_core::population::{self, DistributionSpec};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Mean over equal batches and the standard error of that mean.
fn batched(
    x: &[f64],
    y: &[f64],
    batches: usize,
    stat: impl Fn(&[f64], &[f64]) -> f64,
) -> (f64, f64) {
    let len = x.len() / batches;
    let v: Vec<f64> = (0..batches)
        .map(|b| stat(&x[b * len..(b + 1) * len], &y[b * len..(b + 1) * len]))
        .collect();
    let k = batches as f64;
    let mean = v.iter().sum::<f64>() / k;
    let var = v.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[test]
fn tiny_dataset_by_hand() {
    let sm =
        SampleMatrix::from_columns(vec![0.0, 1.0, 3.0, 7.0], vec![1.0, 0.0, 4.0, 4.0]).unwrap();
    let s = dcor_empirical(&sm);
    assert!((s.v2_xy - 169.0 / 64.0).abs() < 1e-14);
    assert!((s.v2_xx - 305.0 / 64.0).abs() < 1e-14);
    assert!((s.v2_yy - 177.0 / 64.0).abs() < 1e-14);
    assert!((s.r - 0.852854756410148).abs() < 1e-14);
}

#[test]
fn identical_blocks() {
    let spec = DistributionSpec::bivariate_normal(0.3).unwrap();
    let sm = sample(&spec, 300, RngSeed::new(5, 0)).unwrap();
    let x = sm.x_block().to_vec();
    let same = sm.with_blocks(x.clone(), 1, x, 1).unwrap();
    let s = dcor_empirical(&same);
    assert!((s.r - 1.0).abs() < 1e-14);
    assert!((s.v2_xy - s.v2_xx).abs() < 1e-15);
}

#[test]
fn poisson_sample_correlation() {
    let spec = DistributionSpec::bivariate_poisson(1.0, 0.5).unwrap();
    let sm = sample(&spec, 100_000, RngSeed::new(11, 0)).unwrap();
    let (r, se) = batched(sm.x_block(), sm.y_block(), 25, pearson);
    assert!((r - 0.5).abs() < 3.0 * se, "{r} ± {se}");
}

#[test]
fn kibble_sample_moments() {
    let spec = DistributionSpec::bivariate_gamma(2.0, 2.0, 0.4).unwrap();
    let sm = sample(&spec, 100_000, RngSeed::new(12, 0)).unwrap();
    let y = sm.y_block();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!(
        (mean - 2.0).abs() < 3.0 * (2.0 / y.len() as f64).sqrt(),
        "{mean}"
    );
    let (r, se) = batched(sm.x_block(), y, 25, pearson);
    assert!((r - 0.4).abs() < 3.0 * se, "{r} ± {se}");
}

#[test]
fn independent_mvn_within_null_spread() {
    let spec = DistributionSpec::multivariate_normal(DMatrix::zeros(2, 2)).unwrap();
    let sm = sample(&spec, 400, RngSeed::new(13, 0)).unwrap();
    let observed = dcor_empirical(&sm).r;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut rows: Vec<usize> = (0..sm.n()).collect();
    let mut exceed = 0;
    for _ in 0..99 {
        rows.shuffle(&mut rng);
        let y: Vec<f64> = rows.iter().flat_map(|&i| sm.y_row(i).to_vec()).collect();
        let perm = sm.with_blocks(sm.x_block().to_vec(), 2, y, 2).unwrap();
        if dcor_empirical(&perm).r >= observed {
            exceed += 1;
        }
    }
    // permutation p-value (exceed + 1)/100
    assert!(exceed >= 1, "observed {observed} above all permutations");
}

#[test]
fn scrambled_blocks_are_small() {
    let spec = DistributionSpec::bivariate_normal(0.8).unwrap();
    let sm = sample(&spec, 1000, RngSeed::new(15, 0)).unwrap();
    let dependent = dcor_empirical(&sm).r;
    let mut y = sm.y_block().to_vec();
    y.shuffle(&mut ChaCha8Rng::seed_from_u64(16));
    let scrambled = dcor_empirical(&sm.with_blocks(sm.x_block().to_vec(), 1, y, 1).unwrap()).r;
    assert!(
        scrambled < 0.1 && dependent > 0.6,
        "{scrambled} {dependent}"
    );
}

#[test]
fn bvn_replicates_against_population() {
    let spec = DistributionSpec::bivariate_normal(0.5).unwrap();
    let n = 4000;
    let values: Vec<f64> = (0..32)
        .map(|r| dcov2_empirical(&sample(&spec, n, RngSeed::new(17, r)).unwrap()))
        .collect();
    let mean = values.iter().sum::<f64>() / 32.0;
    let se = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 31.0 / 32.0).sqrt();
    let population = population::dcov2_bvn_closed(0.5);
    assert!(
        (mean - population).abs() < 3.0 * se,
        "{mean} ± {se} vs {population}"
    );
    let expected = expected_vn_bvn(n, 0.5);
    assert!(
        (mean - expected).abs() < 3.0 * se,
        "{mean} ± {se} vs {expected}"
    );
}

#[test]
fn sampler_errors() {
    let sar = DistributionSpec::bivariate_gamma(2.0, 1.0, 0.5).unwrap();
    assert!(matches!(
        sample(&sar, 10, RngSeed::new(1, 0)),
        Err(EmpiricalError::UnsupportedSampler(_))
    ));
    let bvn = DistributionSpec::bivariate_normal(0.5).unwrap();
    assert!(sample(&bvn, 1, RngSeed::new(1, 0)).is_err());
    assert!(SampleMatrix::from_columns(vec![1.0, f64::NAN], vec![0.0, 1.0]).is_err());
    let flat = SampleMatrix::from_columns(vec![2.0; 5], vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
    let s = dcor_empirical(&flat);
    assert!(s.degenerate);
    assert_eq!(s.r, 0.0);
    assert!(require_nondegenerate(&flat).is_err());
}

#[test]
fn streams_reproduce() {
    let spec = DistributionSpec::bivariate_negbinomial(1.5, 0.4, 0.3).unwrap();
    let a = sample(&spec, 200, RngSeed::new(99, 3)).unwrap();
    let b = sample(&spec, 200, RngSeed::new(99, 3)).unwrap();
    let c = sample(&spec, 200, RngSeed::new(99, 4)).unwrap();
    assert_eq!(a.x_block(), b.x_block());
    assert_eq!(a.y_block(), b.y_block());
    assert_ne!(a.x_block(), c.x_block());
}
