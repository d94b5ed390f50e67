//! Sarmanov bivariate gamma (Laguerre Lancaster expansion).
//!
//! The marginal coefficients are evaluated through the trigonometric form
//! `∫ cos^{2α}θ sin^m θ e^{i(j-k)θ} dθ`, rewritten with `y = cos²θ` as a
//! Jacobi-weighted polynomial integral and summed with a Gauss–Jacobi rule
//! that is exact for it.  The terminating `₂F₁` at 2 is kept as an
//! independent route ([`gamma_a_coefficient`]).

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_range, PopulationError};
use crate::quadrature::gauss_jacobi_unit;
use crate::series::{
    eval_double_series, CoefficientProvider, GammaConstant, SeriesEvaluation, SeriesOptions,
};
use crate::specfun::summation::pairwise_sum;
use crate::specfun::{gauss_2f1_terminating, ln_factorial, ln_gamma, SpecfunError};

/// Diagonal cap used by [`dcov2_gamma`].
pub const GAMMA_SERIES_CAP: u64 = 2000;
/// Default length of the cached diagonal table for `α = β`.
pub const DEFAULT_TABLE_LEN: usize = 1024;
/// Richardson nodes `λ = 1 - 2^{-i}`.
pub const RICHARDSON_LEVELS: [i32; 6] = [4, 5, 6, 7, 8, 9];

fn ln_c_table(alpha: f64, n_max: usize) -> Vec<f64> {
    let lg = ln_gamma(alpha).expect("alpha > 0");
    (0..=n_max)
        .map(|n| {
            0.5 * (ln_gamma(alpha + n as f64).expect("positive") - lg - ln_factorial(n as u64))
        })
        .collect()
}

/// Marginal coefficients `R_{j,k}`, `j + k = m + 2`, ordered by `j`.
///
/// `ln_c[n] = ½ ln((α)_n / n!)` must cover `n ≤ m + 1`.
fn jacobi_diagonal(alpha: f64, m: usize, ln_c: &[f64]) -> Vec<f64> {
    let even = m % 2 == 0;
    let b = if even {
        (m as f64 - 1.0) / 2.0
    } else {
        m as f64 / 2.0
    };
    let nodes = m / 4 + 3;
    let (rule, ln_mass) = gauss_jacobi_unit(nodes, alpha - 0.5, b);
    let theta: Vec<f64> = rule
        .nodes
        .iter()
        .map(|&y| (1.0 - y).sqrt().atan2(y.sqrt()))
        .collect();
    let d = m + 2;
    let mut out = vec![0.0; d - 1];
    for j in 1..=d / 2 {
        let k = d - j;
        let n = (k - j) as f64;
        let s: f64 = rule
            .weights
            .iter()
            .zip(&theta)
            .map(|(&w, &t)| {
                if even {
                    w * (n * t).cos()
                } else {
                    w * (n * t).sin() / t.sin()
                }
            })
            .sum();
        let v = s * (ln_mass + ln_c[j] + ln_c[k]).exp();
        out[j - 1] = v;
        out[k - 1] = v;
    }
    out
}

/// `R_{j,k}(α)` for a single index pair; `|R_{j,k}| = π 2^{2-2α} |A_{j,k}(α)|`.
pub fn gamma_marginal_coefficient(alpha: f64, j: u64, k: u64) -> f64 {
    assert!(j >= 1 && k >= 1);
    let ln_c = ln_c_table(alpha, (j + k) as usize);
    jacobi_diagonal(alpha, (j + k - 2) as usize, &ln_c)[(j - 1) as usize]
}

/// The coefficient `A_{j,k}(α)` through the terminating `₂F₁(...; 2)`.
pub fn gamma_a_coefficient(alpha: f64, j: u64, k: u64) -> Result<f64, SpecfunError> {
    let (jf, kf) = (j as f64, k as f64);
    let lg = |x: f64| ln_gamma(x);
    let ln_pre = -(jf + kf) * LN_2
        + 0.5 * (lg(alpha + jf)? - ln_factorial(j) + lg(alpha + kf)? - ln_factorial(k))
        - lg(alpha)?
        + lg(2.0 * alpha + jf + kf - 1.0)?
        - lg(alpha + jf)?
        - lg(alpha + kf)?;
    let f = gauss_2f1_terminating(
        j + k - 2,
        1.0 - alpha - jf,
        2.0 - 2.0 * alpha - jf - kf,
        2.0,
    )?;
    Ok(ln_pre.exp() * f)
}

/// Coefficient provider for general `α ≥ β`.
pub struct GammaProvider {
    alpha: f64,
    beta: f64,
    lambda: f64,
    ln_c_alpha: Vec<f64>,
    ln_c_beta: Vec<f64>,
    ln_rho: Vec<f64>,
}

impl GammaProvider {
    pub fn new(alpha: f64, beta: f64, lambda: f64, cap: u64) -> Self {
        let n = cap as usize + 1;
        let ln_c_alpha = ln_c_table(alpha, n);
        let ln_c_beta = ln_c_table(beta, n);
        // a_n = √((β)_n / (α)_n) λ^n = (c_n(β)/c_n(α)) λ^n
        let ln_rho = (0..=n)
            .map(|i| ln_c_beta[i] - ln_c_alpha[i] + i as f64 * lambda.ln())
            .collect();
        Self {
            alpha,
            beta,
            lambda,
            ln_c_alpha,
            ln_c_beta,
            ln_rho,
        }
    }
}

impl CoefficientProvider for GammaProvider {
    fn rho(&self, j: u64) -> f64 {
        if j == 0 {
            1.0
        } else if self.lambda == 0.0 {
            0.0
        } else {
            self.ln_rho[j as usize].exp()
        }
    }

    fn a(&self, j: u64, k: u64) -> f64 {
        gamma_marginal_coefficient(self.alpha, j, k)
    }

    fn b(&self, j: u64, k: u64) -> f64 {
        gamma_marginal_coefficient(self.beta, j, k)
    }

    fn diagonal_terms(&self, d: u64) -> Result<Vec<f64>, SpecfunError> {
        if self.lambda == 0.0 {
            return Ok(vec![0.0; d as usize - 1]);
        }
        let m = d as usize - 2;
        let ra = jacobi_diagonal(self.alpha, m, &self.ln_c_alpha);
        let rb = if self.alpha == self.beta {
            ra.clone()
        } else {
            jacobi_diagonal(self.beta, m, &self.ln_c_beta)
        };
        Ok((1..d as usize)
            .map(|j| {
                let k = d as usize - j;
                (self.ln_rho[j] + self.ln_rho[k]).exp() * ra[j - 1] * rb[j - 1]
            })
            .collect())
    }
}

fn validate(alpha: f64, beta: f64, lambda: f64) -> Result<(), PopulationError> {
    check_range(
        "alpha",
        alpha,
        alpha > 0.0 && alpha.is_finite(),
        "alpha > 0",
    )?;
    check_range(
        "beta",
        beta,
        beta > 0.0 && beta <= alpha,
        "0 < beta <= alpha",
    )?;
    check_range(
        "lambda",
        lambda,
        (0.0..1.0).contains(&lambda),
        "0 <= lambda < 1",
    )
}

/// `V²(X,Y)` for the Sarmanov bivariate gamma with shapes `α ≥ β`.
pub fn dcov2_gamma(
    alpha: f64,
    beta: f64,
    lambda: f64,
    tol: f64,
) -> Result<SeriesEvaluation, PopulationError> {
    validate(alpha, beta, lambda)?;
    if lambda == 0.0 {
        return Ok(SeriesEvaluation::exact(0.0));
    }
    let provider = GammaProvider::new(alpha, beta, lambda, GAMMA_SERIES_CAP);
    let g = GammaConstant::new(1);
    Ok(eval_double_series(
        &provider,
        g,
        g,
        SeriesOptions {
            tol_rel: tol,
            cap: GAMMA_SERIES_CAP,
        },
    )?)
}

/// Asymptotic model `D_m ≈ m^{-5/2} Σ_i c_i m^{-i}` for one parity class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TailFit {
    coefficients: Vec<f64>,
}

impl TailFit {
    fn fit(points: &[(f64, f64)], order: usize) -> Self {
        let rows = points.len();
        let design = DMatrix::from_fn(rows, order, |r, c| points[r].0.powi(-(c as i32)));
        let rhs = DVector::from_iterator(rows, points.iter().map(|&(m, d)| d * m.powf(2.5)));
        let coefficients = design
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .expect("least squares")
            .iter()
            .copied()
            .collect();
        Self { coefficients }
    }

    fn eval(&self, m: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coefficients.iter().rev() {
            acc = acc / m + c;
        }
        acc * m.powf(-2.5)
    }
}

/// Diagonal totals `D_m = Σ_{j+k=m+2} R_{j,k}(α)²` for the `α = β` case, so
/// that `V²(λ) = π^{-2} Σ_m λ^{m+2} D_m`, with a fitted tail beyond the table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaDiagonalTable {
    pub alpha: f64,
    totals: Vec<f64>,
    fits: [TailFit; 2],
    coarse_fits: [TailFit; 2],
}

impl GammaDiagonalTable {
    pub fn new(alpha: f64, len: usize) -> Result<Self, PopulationError> {
        check_range(
            "alpha",
            alpha,
            alpha > 0.0 && alpha.is_finite(),
            "alpha > 0",
        )?;
        check_range("len", len as f64, len >= 64, "table length >= 64")?;
        let ln_c = ln_c_table(alpha, len + 2);
        let totals: Vec<f64> = (0..len)
            .into_par_iter()
            .map(|m| {
                let r = jacobi_diagonal(alpha, m, &ln_c);
                let sq: Vec<f64> = r.iter().map(|v| v * v).collect();
                pairwise_sum(&sq)
            })
            .collect();
        let fit_for = |parity: usize, order: usize| {
            let pts: Vec<(f64, f64)> = (len / 2..len)
                .filter(|m| m % 2 == parity)
                .map(|m| (m as f64, totals[m]))
                .collect();
            TailFit::fit(&pts, order)
        };
        Ok(Self {
            alpha,
            fits: [fit_for(0, 4), fit_for(1, 4)],
            coarse_fits: [fit_for(0, 3), fit_for(1, 3)],
            totals,
        })
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn totals(&self) -> &[f64] {
        &self.totals
    }

    fn tail(&self, fits: &[TailFit; 2], lambda: f64) -> f64 {
        const LAST: usize = 1 << 20;
        let start = self.totals.len();
        let mut sum = 0.0;
        let mut pow = lambda.powi(start as i32 + 2);
        for m in start..LAST {
            let term = pow * fits[m % 2].eval(m as f64);
            sum += term;
            if term.abs() < 1e-20 * sum.abs() {
                return sum;
            }
            pow *= lambda;
        }
        // Σ_{m ≥ LAST} m^{-5/2} ≈ (2/3) LAST^{-3/2}, each parity taking half
        let c0 = 0.5 * (fits[0].coefficients[0] + fits[1].coefficients[0]);
        sum + pow * c0 * (2.0 / 3.0) * (LAST as f64).powf(-1.5)
    }

    /// `V²(X,Y)` at `0 ≤ λ ≤ 1`; `tail_bound` is the table tail together
    /// with the spread between two fit orders.
    pub fn dcov2(&self, lambda: f64) -> SeriesEvaluation {
        let mut pow = lambda * lambda;
        let mut terms = Vec::with_capacity(self.totals.len());
        for &d in &self.totals {
            terms.push(pow * d);
            pow *= lambda;
        }
        let head = pairwise_sum(&terms);
        let tail = self.tail(&self.fits, lambda);
        let coarse = self.tail(&self.coarse_fits, lambda);
        let scale = 1.0 / (PI * PI);
        SeriesEvaluation {
            value: (head + tail) * scale,
            max_index: self.totals.len() as u64 + 1,
            terms_used: self.totals.len() as u64,
            tail_bound: ((tail - coarse).abs() + 1e-3 * tail.abs()) * scale,
            converged: true,
        }
    }
}

/// Extrapolated distance variance together with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub value: f64,
    pub error_estimate: f64,
}

/// Weights `w` with `Σ wᵢ f(hᵢ)` equal to the extrapolated value at `h = 0`.
fn richardson_weights(nodes: &[f64], exponents: &[f64]) -> DVector<f64> {
    let n = nodes.len();
    assert_eq!(exponents.len() + 1, n);
    let a = DMatrix::from_fn(n, n, |r, c| {
        if c == 0 {
            1.0
        } else {
            nodes[r].powf(exponents[c - 1])
        }
    });
    let mut e0 = DVector::zeros(n);
    e0[0] = 1.0;
    a.transpose().lu().solve(&e0).expect("distinct nodes")
}

/// `V²(X,X)` for `X ~ Gamma(α)` by Richardson extrapolation of
/// `V²(λ)` at `λ = 1 - 2^{-i}`, `i = 4..=9`, eliminating the terms
/// `h, h^{3/2}, h², h^{5/2}, h³` of the expansion in `h = 1 - λ`.
///
/// The error estimate is the larger change from either dropping the
/// coarsest node or shifting the node set one level coarser, plus the table
/// tail bounds propagated through the weights.
pub fn dvar_gamma_from_table(table: &GammaDiagonalTable) -> Extrapolation {
    const EXPONENTS: [f64; 5] = [1.0, 1.5, 2.0, 2.5, 3.0];
    let first = RICHARDSON_LEVELS[0];
    let nodes: Vec<f64> = (first - 1..=RICHARDSON_LEVELS[5])
        .map(|i| 2f64.powi(-i))
        .collect();
    let evals: Vec<SeriesEvaluation> = nodes.iter().map(|h| table.dcov2(1.0 - h)).collect();
    let apply = |w: &DVector<f64>, e: &[SeriesEvaluation]| -> f64 {
        w.iter().zip(e).map(|(w, e)| w * e.value).sum()
    };
    let full_w = richardson_weights(&nodes[1..], &EXPONENTS);
    let full = apply(&full_w, &evals[1..]);
    let reduced = apply(
        &richardson_weights(&nodes[2..], &EXPONENTS[..4]),
        &evals[2..],
    );
    let shifted = apply(&richardson_weights(&nodes[..6], &EXPONENTS), &evals[..6]);
    let propagated: f64 = full_w
        .iter()
        .zip(&evals[1..])
        .map(|(w, e)| w.abs() * e.tail_bound)
        .sum();
    Extrapolation {
        value: full,
        error_estimate: (full - reduced).abs().max((full - shifted).abs()) + propagated,
    }
}

pub fn dvar_gamma(alpha: f64) -> Result<Extrapolation, PopulationError> {
    Ok(dvar_gamma_from_table(&GammaDiagonalTable::new(
        alpha,
        DEFAULT_TABLE_LEN,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_routes_agree_on_small_indices() {
        for alpha in [0.3, 1.0, 2.5, 7.0] {
            let scale = PI * 2f64.powf(2.0 - 2.0 * alpha);
            for j in 1..=6 {
                for k in 1..=6 {
                    let r = gamma_marginal_coefficient(alpha, j, k);
                    let a = gamma_a_coefficient(alpha, j, k).unwrap();
                    assert!(
                        (r.abs() - scale * a.abs()).abs() < 1e-10 * r.abs().max(1e-5),
                        "alpha={alpha} j={j} k={k}: {r} vs {}",
                        scale * a
                    );
                }
            }
        }
    }

    #[test]
    fn symmetric_coefficients() {
        for (j, k) in [(1, 4), (2, 7), (3, 8)] {
            assert_eq!(
                gamma_marginal_coefficient(1.7, j, k),
                gamma_marginal_coefficient(1.7, k, j)
            );
        }
    }

    #[test]
    fn zero_dependence() {
        assert_eq!(dcov2_gamma(1.0, 1.0, 0.0, 1e-12).unwrap().value, 0.0);
        assert!(dcov2_gamma(1.0, 2.0, 0.5, 1e-12).is_err());
    }

    #[test]
    fn table_matches_engine() {
        let table = GammaDiagonalTable::new(1.0, 256).unwrap();
        for lambda in [0.3, 0.5, 0.8] {
            let ev = dcov2_gamma(1.0, 1.0, lambda, 1e-13).unwrap();
            let tv = table.dcov2(lambda);
            assert!((ev.value - tv.value).abs() < 1e-12, "lambda={lambda}");
        }
    }

    #[test]
    fn exponential_distance_variance() {
        // V²(X,X) = 1/3 for a unit exponential
        let ex = dvar_gamma(1.0).unwrap();
        assert!((ex.value - 1.0 / 3.0).abs() < 1e-6, "{ex:?}");
        let table = GammaDiagonalTable::new(1.0, DEFAULT_TABLE_LEN).unwrap();
        assert!((table.dcov2(1.0).value - 1.0 / 3.0).abs() < 1e-6);
    }
}
