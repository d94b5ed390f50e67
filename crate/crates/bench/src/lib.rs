//! Shared inputs for the benchmarks under `benches/`.

use dcor_core::empirical::sample;
use dcor_core::{DistributionSpec, RngSeed, SampleMatrix};

/// A reproducible bivariate normal sample of size `n`.
pub fn normal_sample(n: usize, rho: f64) -> SampleMatrix {
    let spec = DistributionSpec::bivariate_normal(rho).expect("|rho| < 1");
    sample(&spec, n, RngSeed::new(0xd1ce, 0)).expect("n >= 2")
}
