//! Bivariate Poisson (Charlier Lancaster expansion).

use super::lattice::adaptive_periodic;
use super::{check_range, PopulationError};
use crate::series::{
    eval_double_series, CoefficientProvider, GammaConstant, SeriesEvaluation, SeriesOptions,
};
use crate::specfun::{kummer_1f1, ln_factorial, rising_factorial, SpecfunError};

/// `I_{j,k} = √(a^{j+k}/(j! k!)) ∫_0^{2π} e^{-2a(1-cos s)} (e^{is}-1)^{j-1} (e^{-is}-1)^{k-1} ds`
/// for all `j + k = d`, ordered by `j`.
fn charlier_diagonal(a: f64, d: u64) -> Vec<f64> {
    let m = (d - 2) as f64;
    let half_ln_a = 0.5 * d as f64 * a.ln();
    let n0 = (d as usize + 3 * a.ceil() as usize + 64).next_power_of_two();
    adaptive_periodic(n0, d as usize - 1, |s, out| {
        let h = (0.5 * s).sin();
        let mut ln = -4.0 * a * h * h + half_ln_a;
        if m > 0.0 {
            ln += m * (2.0 * h).ln();
        }
        for (idx, o) in out.iter_mut().enumerate() {
            let j = idx as u64 + 1;
            let k = d - j;
            let n = j as f64 - k as f64;
            let lf = 0.5 * (ln_factorial(j) + ln_factorial(k));
            *o = (ln - lf).exp() * (0.5 * n * (s + std::f64::consts::PI)).cos();
        }
    })
}

/// Single `I_{j,k}`; equals `π 2^{j+k-1} |A_{jk}|` in the notation of the
/// `₁F₁` form ([`poisson_a_coefficient`]).
pub fn poisson_marginal_coefficient(a: f64, j: u64, k: u64) -> f64 {
    charlier_diagonal(a, j + k)[(j - 1) as usize]
}

/// The coefficient `A_{jk}` as a finite sum of Kummer functions, `j ≥ k`
/// taken after symmetrizing.
pub fn poisson_a_coefficient(a: f64, j: u64, k: u64) -> Result<f64, SpecfunError> {
    let (j, k) = (j.max(k), j.min(k));
    let diff = j - k;
    let mut terms = Vec::new();
    for l in 0..=diff / 2 {
        let binom = ln_factorial(diff) - ln_factorial(2 * l) - ln_factorial(diff - 2 * l);
        let half_l = rising_factorial(0.5, l);
        let half_rest = rising_factorial(0.5, j - l - 1);
        let f = kummer_1f1(j as f64 - l as f64 - 0.5, j as f64, -4.0 * a)?;
        let mag = (binom + half_l.log_magnitude() + half_rest.log_magnitude()).exp();
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(sign * mag * f);
    }
    let sum = crate::specfun::summation::compensated_sum(&terms);
    Ok(sum / (ln_factorial(j - 1)).exp())
}

pub struct PoissonProvider {
    a: f64,
    lambda: f64,
}

impl PoissonProvider {
    pub fn new(a: f64, lambda: f64) -> Self {
        Self { a, lambda }
    }
}

impl CoefficientProvider for PoissonProvider {
    fn rho(&self, j: u64) -> f64 {
        if j == 0 {
            1.0
        } else {
            self.lambda.powi(j as i32)
        }
    }

    fn a(&self, j: u64, k: u64) -> f64 {
        poisson_marginal_coefficient(self.a, j, k)
    }

    fn b(&self, j: u64, k: u64) -> f64 {
        poisson_marginal_coefficient(self.a, j, k)
    }

    fn diagonal_terms(&self, d: u64) -> Result<Vec<f64>, SpecfunError> {
        let w = self.lambda.powi(d as i32);
        Ok(charlier_diagonal(self.a, d)
            .into_iter()
            .map(|v| w * v * v)
            .collect())
    }
}

/// `V²(X,Y)` for the bivariate Poisson with mean `a` and `Corr = λ ∈ [0, 1]`.
pub fn dcov2_poisson(a: f64, lambda: f64, tol: f64) -> Result<SeriesEvaluation, PopulationError> {
    check_range("a", a, a > 0.0 && a.is_finite(), "a > 0")?;
    check_range(
        "lambda",
        lambda,
        (0.0..=1.0).contains(&lambda),
        "0 <= lambda <= 1",
    )?;
    if lambda == 0.0 {
        return Ok(SeriesEvaluation::exact(0.0));
    }
    let g = GammaConstant::new(1);
    Ok(eval_double_series(
        &PoissonProvider::new(a, lambda),
        g,
        g,
        SeriesOptions::with_tol(tol),
    )?)
}

/// `V²(X,X)` for `X ~ Poisson(a)`, the series at `λ = 1`.
pub fn dvar_poisson(a: f64, tol: f64) -> Result<SeriesEvaluation, PopulationError> {
    dcov2_poisson(a, 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kummer_route_matches_trapezoid() {
        for a in [0.3, 1.0, 4.0] {
            for j in 1..=7u64 {
                for k in 1..=7u64 {
                    let direct = poisson_marginal_coefficient(a, j, k);
                    let kummer = poisson_a_coefficient(a, j, k).unwrap();
                    let scaled = PI
                        * 2f64.powi((j + k) as i32 - 1)
                        * kummer.abs()
                        * (a.powi((j + k) as i32) / (ln_factorial(j) + ln_factorial(k)).exp())
                            .sqrt();
                    assert!(
                        (direct.abs() - scaled).abs() < 1e-10 * scaled.max(1e-300),
                        "a={a} j={j} k={k}: {direct} vs {scaled}"
                    );
                }
            }
        }
    }

    #[test]
    fn independence_and_range() {
        assert_eq!(dcov2_poisson(1.0, 0.0, 1e-12).unwrap().value, 0.0);
        assert!(dcov2_poisson(-1.0, 0.5, 1e-12).is_err());
        assert!(dcov2_poisson(1.0, 1.5, 1e-12).is_err());
    }

    #[test]
    fn variance_dominates() {
        let v = dcov2_poisson(1.0, 0.5, 1e-12).unwrap().value;
        let d = dvar_poisson(1.0, 1e-12).unwrap().value;
        assert!(v > 0.0 && v < d);
    }
}
