//! Samplers for each family and the `V_n` estimator.
//!
//! Random streams are ChaCha20 keyed by `seed` with the 64-bit stream id set
//! to `stream`, so a sample is reproducible from `(seed, stream)` alone.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{meixner_orthonormal, negbin_pmf};
use crate::population::DistributionSpec;
use crate::specfun::summation::{pairwise_sum, CompensatedSum};

/// Upper marginal tail left out of the tabulated negative binomial pmf.
pub const NEGBIN_TABLE_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmpiricalError {
    #[error("no sampler for {0}")]
    UnsupportedSampler(String),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// `n` paired observations, `x` rows of length `p` and `y` rows of length `q`,
/// both stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    n: usize,
    p: usize,
    q: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(
        n: usize,
        p: usize,
        q: usize,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> Result<Self, EmpiricalError> {
        if n < 2 {
            return Err(EmpiricalError::InvalidSample(format!(
                "need n >= 2, got {n}"
            )));
        }
        if p == 0 || q == 0 || x.len() != n * p || y.len() != n * q {
            return Err(EmpiricalError::InvalidSample(format!(
                "block sizes {} and {} do not match n = {n}, p = {p}, q = {q}",
                x.len(),
                y.len()
            )));
        }
        if let Some(i) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(EmpiricalError::InvalidSample(format!(
                "non-finite entry at position {i}"
            )));
        }
        Ok(Self { n, p, q, x, y })
    }

    /// Two univariate columns.
    pub fn from_columns(x: Vec<f64>, y: Vec<f64>) -> Result<Self, EmpiricalError> {
        if x.len() != y.len() {
            return Err(EmpiricalError::InvalidSample(
                "columns differ in length".into(),
            ));
        }
        Self::new(x.len(), 1, 1, x, y)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn y_row(&self, i: usize) -> &[f64] {
        &self.y[i * self.q..(i + 1) * self.q]
    }

    pub fn x_block(&self) -> &[f64] {
        &self.x
    }

    pub fn y_block(&self) -> &[f64] {
        &self.y
    }

    /// The same rows with `x` and `y` replaced.
    pub fn with_blocks(
        &self,
        x: Vec<f64>,
        p: usize,
        y: Vec<f64>,
        q: usize,
    ) -> Result<Self, EmpiricalError> {
        Self::new(self.n, p, q, x, y)
    }
}

fn negbin_table(beta: f64, c: f64, lambda: f64) -> (usize, Vec<f64>) {
    let phi = negbin_pmf(beta, c, NEGBIN_TABLE_TAIL);
    let len = phi.len();
    let n_max = if lambda == 0.0 {
        0
    } else {
        ((1e-18f64.ln() / lambda.ln()).ceil() as usize).clamp(1, 20_000)
    };
    let m = meixner_orthonormal(beta, c, len, n_max);
    let mut w = Vec::with_capacity(len * len);
    for x in 0..len {
        for y in 0..len {
            let mut acc = 1.0;
            let mut pow = 1.0;
            for n in 1..=n_max {
                pow *= lambda;
                acc += pow * m[x][n] * m[y][n];
            }
            w.push((phi[x] * phi[y] * acc).max(0.0));
        }
    }
    (len, w)
}

fn unsupported(what: &str) -> EmpiricalError {
    EmpiricalError::UnsupportedSampler(what.into())
}

fn poisson(rng: &mut ChaCha20Rng, mean: f64) -> f64 {
    if mean == 0.0 {
        0.0
    } else {
        Poisson::new(mean).expect("positive mean").sample(rng)
    }
}

/// `n` i.i.d. draws from `spec`.
pub fn sample(
    spec: &DistributionSpec,
    n: usize,
    seed: RngSeed,
) -> Result<SampleMatrix, EmpiricalError> {
    spec.validate()
        .map_err(|e| EmpiricalError::InvalidSample(e.to_string()))?;
    if n < 2 {
        return Err(EmpiricalError::InvalidSample(format!(
            "need n >= 2, got {n}"
        )));
    }
    let mut rng = seed.rng();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    match spec {
        DistributionSpec::BivariateNormal { rho } => {
            let r = (1.0 - rho * rho).sqrt();
            for _ in 0..n {
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                x.push(a);
                y.push(rho * a + r * b);
            }
        }
        DistributionSpec::MixtureBvn { rho } => {
            let r = (1.0 - rho * rho).sqrt();
            for _ in 0..n {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                x.push(a);
                y.push(sign * rho * a + r * b);
            }
        }
        DistributionSpec::GeneralizedBvn { .. } => {
            return Err(unsupported("a general Lancaster sequence"));
        }
        DistributionSpec::MultivariateNormal { lambda_xy } => {
            let (p, q) = lambda_xy.shape();
            let d = p + q;
            let mut cov = DMatrix::<f64>::identity(d, d);
            cov.view_mut((0, p), (p, q)).copy_from(lambda_xy);
            cov.view_mut((p, 0), (q, p))
                .copy_from(&lambda_xy.transpose());
            let chol = cov.cholesky().ok_or_else(|| {
                EmpiricalError::InvalidSample("covariance not positive definite".into())
            })?;
            let l = chol.l();
            let mut xs = Vec::with_capacity(n * p);
            let mut ys = Vec::with_capacity(n * q);
            for _ in 0..n {
                let z =
                    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let v = &l * z;
                xs.extend(v.iter().take(p));
                ys.extend(v.iter().skip(p));
            }
            return SampleMatrix::new(n, p, q, xs, ys);
        }
        DistributionSpec::BivariateGamma {
            alpha,
            beta,
            lambda,
        } => {
            if alpha != beta {
                return Err(unsupported("the Sarmanov gamma with unequal shapes"));
            }
            // X ~ Gamma(α), K | X ~ Poisson(λX/(1-λ)), Y = (1-λ) Gamma(α + K)
            let gx = Gamma::new(*alpha, 1.0).expect("positive shape");
            for _ in 0..n {
                let xv: f64 = gx.sample(&mut rng);
                let k = poisson(&mut rng, lambda * xv / (1.0 - lambda));
                let gy = Gamma::new(alpha + k, 1.0 - lambda).expect("positive shape");
                x.push(xv);
                y.push(gy.sample(&mut rng));
            }
        }
        DistributionSpec::BivariatePoisson { a, lambda } => {
            // X = A + C, Y = B + C
            for _ in 0..n {
                let c = poisson(&mut rng, a * lambda);
                x.push(poisson(&mut rng, a * (1.0 - lambda)) + c);
                y.push(poisson(&mut rng, a * (1.0 - lambda)) + c);
            }
        }
        DistributionSpec::BivariateNegBinomial { beta, c, lambda } => {
            let (len, w) = negbin_table(*beta, *c, *lambda);
            let alias = WeightedAliasIndex::new(w)
                .map_err(|e| EmpiricalError::InvalidSample(e.to_string()))?;
            for _ in 0..n {
                let cell = alias.sample(&mut rng);
                x.push((cell / len) as f64);
                y.push((cell % len) as f64);
            }
        }
    }
    SampleMatrix::from_columns(x, y)
}

/// Row-major block of points with a distance to row `k` specialized on
/// dimension.
#[derive(Clone, Copy)]
struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl Points<'_> {
    #[inline]
    fn dist(&self, k: usize, l: usize) -> f64 {
        if self.dim == 1 {
            (self.data[k] - self.data[l]).abs()
        } else {
            let (a, b) = (
                &self.data[k * self.dim..(k + 1) * self.dim],
                &self.data[l * self.dim..(l + 1) * self.dim],
            );
            a.iter()
                .zip(b)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt()
        }
    }

    fn row_means(&self, n: usize) -> (Vec<f64>, f64) {
        let means: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut acc = CompensatedSum::new();
                for l in 0..n {
                    acc.add(self.dist(k, l));
                }
                acc.value() / n as f64
            })
            .collect();
        let grand = pairwise_sum(&means) / n as f64;
        (means, grand)
    }
}

fn centered_product(sm: &SampleMatrix, first: Block, second: Block) -> f64 {
    let n = sm.n;
    let pick = |b: Block| match b {
        Block::X => Points {
            data: &sm.x,
            dim: sm.p,
        },
        Block::Y => Points {
            data: &sm.y,
            dim: sm.q,
        },
    };
    let (pa, pb) = (pick(first), pick(second));
    let (ma, ga) = pa.row_means(n);
    let (mb, gb) = if first == second {
        (ma.clone(), ga)
    } else {
        pb.row_means(n)
    };
    // Σ_{k,l} A_kl B_kl over the strict upper triangle, doubled, plus the diagonal
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut acc = CompensatedSum::new();
            acc.add((-2.0 * ma[k] + ga) * (-2.0 * mb[k] + gb));
            let (ca, cb) = (ga - ma[k], gb - mb[k]);
            for l in k + 1..n {
                let a = pa.dist(k, l) - ma[l] + ca;
                let b = pb.dist(k, l) - mb[l] + cb;
                acc.add(2.0 * a * b);
            }
            acc.value()
        })
        .collect();
    pairwise_sum(&rows) / (n as f64 * n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Block {
    X,
    Y,
}

/// `V²_n(X,Y) = n^{-2} Σ_{k,l} A_kl B_kl` with double-centered distance
/// matrices, streamed by rows (`O(n)` extra memory).
pub fn dcov2_empirical(sm: &SampleMatrix) -> f64 {
    centered_product(sm, Block::X, Block::Y).max(0.0)
}

/// Empirical distance covariance and variances with `R_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSummary {
    pub n: usize,
    pub v2_xy: f64,
    pub v2_xx: f64,
    pub v2_yy: f64,
    pub r: f64,
    /// A block was constant, so `R_n` is 0 by convention.
    pub degenerate: bool,
}

/// `R_n` and its components; `R_n = 0` when either distance variance is 0.
pub fn dcor_empirical(sm: &SampleMatrix) -> EmpiricalSummary {
    let v2_xy = dcov2_empirical(sm);
    let v2_xx = centered_product(sm, Block::X, Block::X).max(0.0);
    let v2_yy = centered_product(sm, Block::Y, Block::Y).max(0.0);
    let degenerate = v2_xx == 0.0 || v2_yy == 0.0;
    let r = if degenerate {
        0.0
    } else {
        (v2_xy / (v2_xx * v2_yy).sqrt()).sqrt().clamp(0.0, 1.0)
    };
    EmpiricalSummary {
        n: sm.n,
        v2_xy,
        v2_xx,
        v2_yy,
        r,
        degenerate,
    }
}

/// `Err(DegenerateSample)` when a block is constant.
pub fn require_nondegenerate(sm: &SampleMatrix) -> Result<(), EmpiricalError> {
    let constant = |rows: &[f64], w: usize| rows.chunks(w).all(|r| r == &rows[..w]);
    if constant(&sm.x, sm.p) {
        return Err(EmpiricalError::DegenerateSample(
            "x block is constant".into(),
        ));
    }
    if constant(&sm.y, sm.q) {
        return Err(EmpiricalError::DegenerateSample(
            "y block is constant".into(),
        ));
    }
    Ok(())
}

/// Sample joint characteristic function at `(s, t)` of a univariate pair
/// with the Monte Carlo standard errors of its real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CfEstimate {
    pub value: C64,
    pub se_re: f64,
    pub se_im: f64,
}

impl CfEstimate {
    /// Largest standardized deviation of the two components from `target`.
    pub fn z_score(&self, target: C64) -> f64 {
        let z = |d: f64, se: f64| {
            if se > 0.0 {
                d.abs() / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        z(self.value.re - target.re, self.se_re).max(z(self.value.im - target.im, self.se_im))
    }
}

pub fn empirical_cf(sm: &SampleMatrix, s: f64, t: f64) -> CfEstimate {
    let n = sm.n as f64;
    let (mut cr, mut ci, mut cr2, mut ci2) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..sm.n {
        let (sn, cs) = (s * sm.x_row(i)[0] + t * sm.y_row(i)[0]).sin_cos();
        cr += cs;
        ci += sn;
        cr2 += cs * cs;
        ci2 += sn * sn;
    }
    let (mr, mi) = (cr / n, ci / n);
    let var = |m2: f64, m: f64| ((m2 / n - m * m) * n / (n - 1.0)).max(0.0);
    CfEstimate {
        value: C64::new(mr, mi),
        se_re: (var(cr2, mr) / n).sqrt(),
        se_im: (var(ci2, mi) / n).sqrt(),
    }
}

/// Exact `E[V²_n]` in terms of `α = E|X-X'||Y-Y'|`, `γ = E|X-X'||Y-Y''|`
/// and `β = E|X-X'| E|Y-Y'|`; the population value is `α + β - 2γ`.
pub fn expected_vn(n: usize, alpha: f64, beta: f64, gamma: f64) -> f64 {
    let n = n as f64;
    let s1 = (n - 1.0) / n * alpha;
    let s2 = (n - 1.0) / n.powi(3)
        * (2.0 * alpha + 4.0 * (n - 2.0) * gamma + (n - 2.0) * (n - 3.0) * beta);
    let s3 = (n - 1.0) / (n * n) * (alpha + (n - 2.0) * gamma);
    s1 + s2 - 2.0 * s3
}

/// `E[V²_n]` for the standard bivariate normal.
pub fn expected_vn_bvn(n: usize, rho: f64) -> f64 {
    use std::f64::consts::PI;
    // E|U||V| = (2/π)(√(1-r²) + r asin r) for unit normals with correlation r
    let abs_moment = |r: f64| 2.0 / PI * ((1.0 - r * r).sqrt() + r * r.asin());
    let alpha = 2.0 * abs_moment(rho);
    let gamma = 2.0 * abs_moment(0.5 * rho);
    let beta = 4.0 / PI;
    expected_vn(n, alpha, beta, gamma)
}
