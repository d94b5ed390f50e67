//! Bivariate negative binomial (Meixner Lancaster expansion).

use std::f64::consts::PI;

use super::lattice::adaptive_periodic;
use super::{check_range, PopulationError};
use crate::series::{
    eval_double_series, CoefficientProvider, GammaConstant, SeriesEvaluation, SeriesOptions,
};
use crate::specfun::summation::CompensatedSum;
use crate::specfun::{ln_factorial, ln_gamma, SpecfunError, DEFAULT_TERM_CAP};

fn ln_meixner_norm(beta: f64, n: u64) -> f64 {
    // ½ ln((β)_n / n!)
    0.5 * (ln_gamma(beta + n as f64).expect("positive")
        - ln_gamma(beta).expect("positive")
        - ln_factorial(n))
}

/// `A_{j,k} = (1-c)^{2β} c^{(j+k)/2} √((β)_j (β)_k / (j! k!)) · J_{j,k}` with
/// `J_{j,k} = ∫_0^{2π} (1-ce^{is})^{-β-j} (1-ce^{-is})^{-β-k} (1-e^{is})^{j-1} (1-e^{-is})^{k-1} ds`,
/// for all `j + k = d`, ordered by `j`.
fn meixner_diagonal(beta: f64, c: f64, d: u64) -> Vec<f64> {
    let m = (d - 2) as f64;
    let base = 2.0 * beta * (1.0 - c).ln() + 0.5 * d as f64 * c.ln();
    let norms: Vec<f64> = (1..d)
        .map(|j| ln_meixner_norm(beta, j) + ln_meixner_norm(beta, d - j))
        .collect();
    let decay = (-(1.0 / c).ln()).recip().abs();
    let n0 =
        (2 * d as usize + 64 + (decay * (40.0 + beta + d as f64)) as usize).next_power_of_two();
    adaptive_periodic(n0, d as usize - 1, |s, out| {
        let (sn, cs) = s.sin_cos();
        let (re, im) = (1.0 - c * cs, -c * sn);
        let ln_r = 0.5 * (re * re + im * im).ln();
        let phi = im.atan2(re);
        let mut ln = base - (2.0 * beta + d as f64) * ln_r;
        if m > 0.0 {
            ln += m * (2.0 * (0.5 * s).sin()).ln();
        }
        for (idx, o) in out.iter_mut().enumerate() {
            let j = idx as f64 + 1.0;
            let k = d as f64 - j;
            *o = (ln + norms[idx]).exp() * ((j - k) * (0.5 * (s - PI) - phi)).cos();
        }
    })
}

/// Single `A_{j,k}` by the periodic trapezoid rule.
pub fn negbin_marginal_coefficient(beta: f64, c: f64, j: u64, k: u64) -> f64 {
    meixner_diagonal(beta, c, j + k)[(j - 1) as usize]
}

/// `₂F₁(-ℓ, K-½; K; 2)` for `ℓ = 0..len` by the three-term recurrence in `ℓ`.
fn chebyshev_moment_table(kk: u64, len: usize) -> Vec<f64> {
    let kf = kk as f64;
    let mut f = Vec::with_capacity(len.max(2));
    f.push(1.0);
    f.push(-(kf - 1.0) / kf);
    for l in 1..len.saturating_sub(1) {
        let lf = l as f64;
        let next = (lf * f[l - 1] - (kf - 1.0) * f[l]) / (kf + lf);
        f.push(next);
    }
    f.truncate(len.max(1));
    f
}

/// `A_{j,k}` through the nested binomial / Chebyshev / `₂F₁` sums, with the
/// infinite `ℓ`-sum cut once its terms fall below `tol` relative to the
/// partial sum.  The returned value is normalized like
/// [`negbin_marginal_coefficient`].
pub fn negbin_a_coefficient(
    beta: f64,
    c: f64,
    j: u64,
    k: u64,
    tol: f64,
) -> Result<f64, SpecfunError> {
    let (j, k) = (j.max(k), j.min(k));
    let diff = j - k;
    let x = 2.0 * c / (1.0 + c * c);
    let bj = beta + j as f64;
    let ln_binom = |n: u64, r: u64| ln_factorial(n) - ln_factorial(r) - ln_factorial(n - r);

    // inner(N) = Σ_ℓ (β+j)_ℓ/ℓ! x^ℓ Σ_m T(N, m) h(k+m) F_ℓ(k+m)
    let inner = |nn: u64| -> Result<f64, SpecfunError> {
        let mut cheb = Vec::new();
        for m in 0..=nn {
            // T_N(x) = Σ_m (-2)^m N! (N)_m / ((N-m)! (2m)!) (1-x)^m
            let coef = if nn == 0 {
                if m == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                let ln = ln_factorial(nn) + ln_gamma((nn + m) as f64)?
                    - ln_gamma(nn as f64)?
                    - ln_factorial(nn - m)
                    - ln_factorial(2 * m);
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                sign * (ln + m as f64 * std::f64::consts::LN_2).exp()
            };
            let kk = k + m;
            // h(K) = 2^{K-1} (½)_{K-1} / (K-1)!
            let h = ((kk - 1) as f64 * std::f64::consts::LN_2 + ln_gamma(kk as f64 - 0.5)?
                - ln_gamma(0.5)?
                - ln_factorial(kk - 1))
            .exp();
            cheb.push((coef * h, kk));
        }
        let mut acc = CompensatedSum::new();
        let mut weight = 1.0;
        let mut tables: Vec<Vec<f64>> = Vec::new();
        let mut len = 256;
        let mut small = 0;
        for l in 0..DEFAULT_TERM_CAP {
            if l >= tables.first().map_or(0, |t| t.len()) {
                len = (len * 2).max(l + 1);
                tables = cheb
                    .iter()
                    .map(|&(_, kk)| chebyshev_moment_table(kk, len))
                    .collect();
            }
            let g: f64 = cheb.iter().zip(&tables).map(|(&(w, _), t)| w * t[l]).sum();
            let term = weight * g;
            acc.add(term);
            if term.abs() <= tol * acc.value().abs() || term == 0.0 {
                small += 1;
                if small >= 5 && weight < tol {
                    return Ok(acc.value());
                }
            } else {
                small = 0;
            }
            weight *= (bj + l as f64) / (l as f64 + 1.0) * x;
        }
        Err(SpecfunError::NonConvergence {
            terms: DEFAULT_TERM_CAP,
            partial: acc.value(),
        })
    };

    let mut by_n = vec![None; diff as usize + 1];
    let mut total = CompensatedSum::new();
    for l1 in 0..=diff {
        for l2 in 0..=diff {
            let nn = l1.abs_diff(l2);
            let val = match by_n[nn as usize] {
                Some(v) => v,
                None => {
                    let v = inner(nn)?;
                    by_n[nn as usize] = Some(v);
                    v
                }
            };
            let sign = if (l1 + l2) % 2 == 0 { 1.0 } else { -1.0 };
            let mag = (ln_binom(diff, l1) + ln_binom(diff, l2) + l1 as f64 * c.ln()).exp();
            total.add(sign * mag * val);
        }
    }
    // J = π 2^k (1+c²)^{-β-j} · (sum), then the Meixner normalization
    let ln_scale = PI.ln() + k as f64 * std::f64::consts::LN_2 - bj * (1.0 + c * c).ln()
        + 2.0 * beta * (1.0 - c).ln()
        + 0.5 * (j + k) as f64 * c.ln()
        + ln_meixner_norm(beta, j)
        + ln_meixner_norm(beta, k);
    Ok(total.value() * ln_scale.exp())
}

pub struct NegBinProvider {
    beta: f64,
    c: f64,
    lambda: f64,
}

impl NegBinProvider {
    pub fn new(beta: f64, c: f64, lambda: f64) -> Self {
        Self { beta, c, lambda }
    }
}

impl CoefficientProvider for NegBinProvider {
    fn rho(&self, j: u64) -> f64 {
        if j == 0 {
            1.0
        } else {
            self.lambda.powi(j as i32)
        }
    }

    fn a(&self, j: u64, k: u64) -> f64 {
        negbin_marginal_coefficient(self.beta, self.c, j, k)
    }

    fn b(&self, j: u64, k: u64) -> f64 {
        negbin_marginal_coefficient(self.beta, self.c, j, k)
    }

    fn diagonal_terms(&self, d: u64) -> Result<Vec<f64>, SpecfunError> {
        let w = self.lambda.powi(d as i32);
        Ok(meixner_diagonal(self.beta, self.c, d)
            .into_iter()
            .map(|v| w * v * v)
            .collect())
    }
}

pub(crate) fn validate(beta: f64, c: f64, lambda: f64) -> Result<(), PopulationError> {
    check_range("beta", beta, beta > 0.0 && beta.is_finite(), "beta > 0")?;
    check_range("c", c, c > 0.0 && c < 1.0, "0 < c < 1")?;
    check_range(
        "lambda",
        lambda,
        (0.0..1.0).contains(&lambda),
        "0 <= lambda < 1",
    )
}

/// `V²(X,Y)` for the bivariate negative binomial.
pub fn dcov2_negbinomial(
    beta: f64,
    c: f64,
    lambda: f64,
    tol: f64,
) -> Result<SeriesEvaluation, PopulationError> {
    validate(beta, c, lambda)?;
    if lambda == 0.0 {
        return Ok(SeriesEvaluation::exact(0.0));
    }
    let g = GammaConstant::new(1);
    Ok(eval_double_series(
        &NegBinProvider::new(beta, c, lambda),
        g,
        g,
        SeriesOptions::with_tol(tol),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gauss_2f1_terminating;

    #[test]
    fn recurrence_matches_terminating_sum() {
        for kk in [1u64, 2, 5, 11] {
            let t = chebyshev_moment_table(kk, 60);
            for l in [0usize, 1, 7, 30, 59] {
                let want =
                    gauss_2f1_terminating(l as u64, kk as f64 - 0.5, kk as f64, 2.0).unwrap();
                assert!((t[l] - want).abs() < 1e-12, "K={kk} l={l}");
            }
        }
    }

    #[test]
    fn nested_sums_match_trapezoid() {
        for (beta, c) in [(1.0, 0.3), (2.5, 0.5), (0.4, 0.2)] {
            for j in 1..=6u64 {
                for k in 1..=6u64 {
                    let direct = negbin_marginal_coefficient(beta, c, j, k);
                    let nested = negbin_a_coefficient(beta, c, j, k, 1e-15).unwrap();
                    assert!(
                        (direct - nested).abs() < 1e-9 * direct.abs().max(1e-12),
                        "beta={beta} c={c} j={j} k={k}: {direct} vs {nested}"
                    );
                }
            }
        }
    }

    #[test]
    fn independence_and_range() {
        assert_eq!(dcov2_negbinomial(1.0, 0.3, 0.0, 1e-12).unwrap().value, 0.0);
        assert!(dcov2_negbinomial(1.0, 1.0, 0.5, 1e-12).is_err());
        assert!(dcov2_negbinomial(1.0, 0.3, 1.0, 1e-12).is_err());
    }
}
