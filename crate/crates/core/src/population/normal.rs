//! Bivariate normal, its Lancaster generalizations, and the multivariate
//! normal with `Λ_XY = ρ I_p`.

use std::f64::consts::PI;

use super::{check_range, PopulationError};
use crate::series::{
    eval_double_series, CoefficientProvider, GammaConstant, SeriesEvaluation, SeriesOptions,
    DEFAULT_SCALAR_CAP,
};
use crate::specfun::{double_factorial, gauss_2f1_at_one, gauss_2f1_disc, ln_factorial, ln_gamma};

/// Hermite-basis coefficients shared by the normal family: with
/// `m = j + k - 2` even, `A_{j,k} = Γ((m+1)/2) / √(j! k!)`, and zero for odd `m`.
pub struct HermiteProvider<F: Fn(u64) -> f64 + Sync> {
    rho: F,
}

impl<F: Fn(u64) -> f64 + Sync> HermiteProvider<F> {
    pub fn new(rho: F) -> Self {
        Self { rho }
    }
}

pub(crate) fn hermite_coefficient(j: u64, k: u64) -> f64 {
    let d = j + k;
    if d % 2 == 1 {
        return 0.0;
    }
    let m = d - 2;
    let ln_gamma_half = if m <= 256 {
        // Γ((m+1)/2) = (m-1)!! √π / 2^{m/2} for even m
        let df = double_factorial(m as i64 - 1).expect("m - 1 >= -1");
        df.log_magnitude() + 0.5 * PI.ln() - 0.5 * m as f64 * std::f64::consts::LN_2
    } else {
        ln_gamma(0.5 * (m + 1) as f64).expect("positive")
    };
    (ln_gamma_half - 0.5 * (ln_factorial(j) + ln_factorial(k))).exp()
}

impl<F: Fn(u64) -> f64 + Sync> CoefficientProvider for HermiteProvider<F> {
    fn rho(&self, j: u64) -> f64 {
        if j == 0 {
            1.0
        } else {
            (self.rho)(j)
        }
    }

    fn a(&self, j: u64, k: u64) -> f64 {
        hermite_coefficient(j, k)
    }

    fn b(&self, j: u64, k: u64) -> f64 {
        hermite_coefficient(j, k)
    }
}

/// Diagonal cap large enough for terms decaying like `|rho|^d` to pass the
/// stop rule at `tol`, and never below the engine default.
pub fn geometric_cap(rho: f64, tol: f64) -> u64 {
    let r = rho.abs();
    if r == 0.0 || !(tol > 0.0) {
        return DEFAULT_SCALAR_CAP;
    }
    let needed = 1.5 * (tol * (1.0 - r * r) * 1e-2).ln() / r.ln();
    DEFAULT_SCALAR_CAP.max(needed.ceil().min(1e7) as u64)
}

/// Series value of `V²(X,Y)` for the standard bivariate normal, with the
/// diagonal cap from [`geometric_cap`].
pub fn dcov2_bvn_series(rho: f64, tol: f64) -> Result<SeriesEvaluation, PopulationError> {
    dcov2_bvn_series_with(
        rho,
        SeriesOptions {
            tol_rel: tol,
            cap: geometric_cap(rho, tol),
        },
    )
}

/// As [`dcov2_bvn_series`] with an explicit stop rule and diagonal cap.
pub fn dcov2_bvn_series_with(
    rho: f64,
    options: SeriesOptions,
) -> Result<SeriesEvaluation, PopulationError> {
    check_range("rho", rho, rho.abs() < 1.0, "|rho| < 1")?;
    if rho == 0.0 {
        return Ok(SeriesEvaluation::exact(0.0));
    }
    let provider = HermiteProvider::new(move |j| rho.powi(j as i32));
    let g = GammaConstant::new(1);
    Ok(eval_double_series(&provider, g, g, options)?)
}

/// Closed form `(4/π)(ρ asin ρ + √(1-ρ²) - ρ asin(ρ/2) - √(4-ρ²) + 1)`.
pub fn dcov2_bvn_closed(rho: f64) -> f64 {
    let r = rho.abs().min(1.0);
    let v = r * r.asin() + (1.0 - r * r).sqrt() - r * (0.5 * r).asin() - (4.0 - r * r).sqrt() + 1.0;
    (4.0 / PI * v).max(0.0)
}

/// `V²(X,X) = 4/3 - 4(√3 - 1)/π` for a standard normal `X`.
pub fn dvar_normal_univariate() -> f64 {
    4.0 / 3.0 - 4.0 * (3f64.sqrt() - 1.0) / PI
}

/// Lancaster generalization with an arbitrary sequence `ρ_n`, `ρ_0 = 1`.
///
/// The caller is responsible for `ρ_n` being a moment sequence; only the
/// engine's stop rule and cap guard the summation.
pub fn dcov2_bvn_generalized(
    rho_seq: &(dyn Fn(u64) -> f64 + Sync),
    tol: f64,
) -> Result<SeriesEvaluation, PopulationError> {
    dcov2_bvn_generalized_with(rho_seq, SeriesOptions::with_tol(tol))
}

/// As [`dcov2_bvn_generalized`] with an explicit stop rule and diagonal cap.
pub fn dcov2_bvn_generalized_with(
    rho_seq: &(dyn Fn(u64) -> f64 + Sync),
    options: SeriesOptions,
) -> Result<SeriesEvaluation, PopulationError> {
    let provider = HermiteProvider::new(rho_seq);
    let g = GammaConstant::new(1);
    Ok(eval_double_series(&provider, g, g, options)?)
}

/// Closed form for the equal mixture of normals with correlations `±ρ`.
pub fn dcov2_bvn_mixture_closed(rho: f64) -> f64 {
    let r = rho.abs().min(1.0);
    let v = 0.5 * r * r.asin() + 0.5 * (1.0 - r * r).sqrt()
        - r * (0.5 * r).asin()
        - (4.0 - r * r).sqrt()
        + 1.5;
    (4.0 / PI * v).max(0.0)
}

fn mvn_prefactor(p: u32) -> f64 {
    let ratio = GammaConstant::new(p - 1).value / GammaConstant::new(p).value;
    4.0 * PI * ratio * ratio
}

/// `Σ_{n≥1} t_n z^n (1 - 2·4^{-n})` with `t_n` the `₂F₁(-½,-½;c;·)` coefficients;
/// equals `F(z) - 2F(z/4) + 1` without the leading cancellation.
fn mvn_difference_series(c: f64, z: f64) -> Result<f64, PopulationError> {
    let mut sum = 0.0;
    let mut t = 1.0;
    let mut quarter = 1.0;
    for n in 0..100_000u32 {
        let fnn = f64::from(n);
        t *= (-0.5 + fnn) * (-0.5 + fnn) / ((c + fnn) * (fnn + 1.0)) * z;
        quarter *= 0.25;
        let term = t * (1.0 - 2.0 * quarter);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(PopulationError::InvalidParameter(format!(
        "difference series stalled at z = {z}"
    )))
}

/// Affinely invariant `V²` for `N_{2p}` with `Λ_XY = ρ I_p`.
pub fn dcov2_mvn_diag(p: u32, rho: f64) -> Result<f64, PopulationError> {
    check_range("p", f64::from(p), p >= 1, "p >= 1")?;
    check_range("rho", rho, rho.abs() <= 1.0, "|rho| <= 1")?;
    let c = 0.5 * f64::from(p);
    let z = rho * rho;
    let bracket = if z == 1.0 {
        gauss_2f1_at_one(-0.5, -0.5, c)? - 2.0 * gauss_2f1_disc(-0.5, -0.5, c, 0.25)? + 1.0
    } else if z <= 0.5 {
        mvn_difference_series(c, z)?
    } else {
        gauss_2f1_disc(-0.5, -0.5, c, z)? - 2.0 * gauss_2f1_disc(-0.5, -0.5, c, 0.25 * z)? + 1.0
    };
    Ok((mvn_prefactor(p) * bracket).max(0.0))
}

/// Affinely invariant distance variance of `N_p(0, I)`.
pub fn dvar_mvn(p: u32) -> Result<f64, PopulationError> {
    dcov2_mvn_diag(p, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        assert_eq!(dcov2_bvn_closed(0.0), 0.0);
        assert!((dcov2_bvn_closed(1.0) - dvar_normal_univariate()).abs() < 1e-15);
        assert_eq!(dcov2_bvn_closed(-0.3), dcov2_bvn_closed(0.3));
        assert_eq!(dcov2_bvn_mixture_closed(0.0), 0.0);
    }

    #[test]
    fn first_hermite_coefficient() {
        assert!((hermite_coefficient(1, 1) - PI.sqrt()).abs() < 1e-15);
        assert_eq!(hermite_coefficient(1, 2), 0.0);
    }

    #[test]
    fn series_matches_closed_form() {
        for rho in [0.1, 0.5, 0.9, -0.7] {
            let ev = dcov2_bvn_series(rho, 1e-12).unwrap();
            assert!(ev.converged);
            assert!(
                (ev.value - dcov2_bvn_closed(rho)).abs() < 1e-10,
                "rho={rho}"
            );
        }
    }

    #[test]
    fn mixture_through_generalized() {
        let rho: f64 = 0.6;
        let seq = move |n: u64| if n % 2 == 0 { rho.powi(n as i32) } else { 0.0 };
        let ev = dcov2_bvn_generalized(&seq, 1e-12).unwrap();
        assert!((ev.value - dcov2_bvn_mixture_closed(rho)).abs() < 1e-10);
    }

    #[test]
    fn mvn_diag_reduces_to_bvn() {
        for i in 0..=20 {
            let rho = 0.05 * f64::from(i);
            let got = dcov2_mvn_diag(1, rho).unwrap();
            assert!((got - dcov2_bvn_closed(rho)).abs() < 1e-12, "rho={rho}");
        }
        assert!((dvar_mvn(1).unwrap() - dvar_normal_univariate()).abs() < 1e-13);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(dcov2_bvn_series(1.0, 1e-12).is_err());
        assert!(dcov2_mvn_diag(0, 0.5).is_err());
        assert!(dcov2_mvn_diag(2, 1.5).is_err());
    }
}
