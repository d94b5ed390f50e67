//! Direct numerical evaluation of the distance covariance as a weighted
//! integral over characteristic functions,
//! `V² = π^{-2} ∫∫ |ψ_{XY}(s,t) - ψ_X(s)ψ_Y(t)|² / (s² t²) ds dt`.
//!
//! Continuous families are integrated over `(0, ∞)²` (both sign patterns of
//! `t`) with dyadic Gauss–Legendre panels towards the axes, unit panels up
//! to a cutoff `S`, and a mapped tail.  Lattice families have `2π`-periodic
//! characteristic functions, so the kernel is periodized,
//! `Σ_n (s + 2πn)^{-2} = 1/(4 sin²(s/2))`, and the integral reduces to one
//! period where the offset trapezoid rule converges geometrically.

pub mod cf;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{gauss_legendre, tanh_sinh, Rule};
use crate::series::GammaConstant;
use crate::specfun::ln_gamma;

pub use cf::{
    cexpm1, cf_bivariate_poisson, cf_bvn, cf_gamma_identical, cf_kibble_gamma, cf_mixture_bvn,
    cf_negbinomial, cf_negbinomial_identical, cf_sarmanov_gamma, clog1p, meixner_orthonormal,
    negbin_pmf, Cf1, Cf2,
};

/// Points closer than this to an axis take the one-sided quadratic limit.
pub const NEAR_AXIS: f64 = 1e-6;
/// Tail contributions above this fraction of the value are rejected.
pub const TAIL_DOMINANCE_RATIO: f64 = 0.1;
const DYADIC_LEVELS: i32 = 20;
const ANGULAR_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(String),
    #[error("tail contribution {tail:e} exceeds 10% of the value {value:e}")]
    TailDominance { tail: f64, value: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Joint and marginal characteristic functions together with the
/// cancellation-free difference `ψ_{XY} - ψ_X ψ_Y`.
#[derive(Clone)]
pub struct CharacteristicTriple {
    pub joint: Cf2,
    pub marginal_x: Cf1,
    pub marginal_y: Cf1,
    pub difference: Cf2,
    /// Integer-valued margins: all three functions are `2π`-periodic.
    pub lattice: bool,
    /// Bound on the part of `V²` outside `[0, S]²` as a function of `S`.
    pub analytic_tail: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    /// Probability mass dropped when the law was truncated.
    pub truncation_mass: f64,
}

impl fmt::Debug for CharacteristicTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CharacteristicTriple")
            .field("lattice", &self.lattice)
            .field("analytic_tail", &self.analytic_tail.is_some())
            .field("truncation_mass", &self.truncation_mass)
            .finish_non_exhaustive()
    }
}

/// Value at `x` of the quadratic through `f` at `anchor + σh, anchor + 2σh,
/// anchor + 3σh`, where `σ` points from the singular `anchor` toward `x`.
fn quadratic_limit(x: f64, anchor: f64, f: impl Fn(f64) -> f64) -> f64 {
    let sigma = if x < anchor || (x == anchor && anchor > 0.0) {
        -1.0
    } else {
        1.0
    };
    let h = NEAR_AXIS;
    let (f1, f2, f3) = (
        f(anchor + sigma * h),
        f(anchor + 2.0 * sigma * h),
        f(anchor + 3.0 * sigma * h),
    );
    let u = (x - anchor).abs();
    let l1 = (u - 2.0 * h) * (u - 3.0 * h) / (2.0 * h * h);
    let l2 = -(u - h) * (u - 3.0 * h) / (h * h);
    let l3 = (u - h) * (u - 2.0 * h) / (2.0 * h * h);
    (f1 * l1 + f2 * l2 + f3 * l3).max(0.0)
}

impl CharacteristicTriple {
    pub fn joint(&self, s: f64, t: f64) -> C64 {
        (self.joint)(s, t)
    }

    pub fn marginal_x(&self, s: f64) -> C64 {
        (self.marginal_x)(s)
    }

    pub fn marginal_y(&self, t: f64) -> C64 {
        (self.marginal_y)(t)
    }

    pub fn difference(&self, s: f64, t: f64) -> C64 {
        (self.difference)(s, t)
    }

    fn raw_integrand(&self, s: f64, t: f64) -> f64 {
        if self.lattice {
            let (hs, ht) = ((0.5 * s).sin(), (0.5 * t).sin());
            self.difference(s, t).norm_sqr() / (16.0 * hs * hs * ht * ht)
        } else {
            (self.difference(s, t).norm_sqr() + self.difference(s, -t).norm_sqr()) / (s * s * t * t)
        }
    }

    /// The integrand at `s, t > 0`: `(|Δ(s,t)|² + |Δ(s,-t)|²)/(s²t²)` for
    /// continuous laws, `|Δ(s,t)|²/(16 sin²(s/2) sin²(t/2))` on the period
    /// for lattice laws.  Within [`NEAR_AXIS`] of an axis the value is the
    /// quadratic extrapolation from three interior points.
    pub fn integrand(&self, s: f64, t: f64) -> f64 {
        let singular = |x: f64| {
            let anchor = if self.lattice {
                (x / (2.0 * PI)).round() * 2.0 * PI
            } else {
                0.0
            };
            ((x - anchor).abs() < NEAR_AXIS).then_some(anchor)
        };
        match (singular(s), singular(t)) {
            (None, None) => self.raw_integrand(s, t),
            (Some(a), _) => quadratic_limit(s, a, |x| self.integrand(x, t)),
            (None, Some(a)) => quadratic_limit(t, a, |y| self.integrand(s, y)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureScheme {
    GaussLegendrePanels,
    TanhSinh,
}

/// How the region beyond the cutoff is handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMode {
    /// Integrate `[S, ∞)` after the substitution `s = S/u`.
    Mapped,
    /// Truncate at `S` and add a family-specific analytic bound to the error.
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub cutoff: f64,
    pub points_per_axis: usize,
    pub scheme: QuadratureScheme,
    pub tail_mode: TailMode,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            cutoff: 40.0,
            points_per_axis: 1024,
            scheme: QuadratureScheme::GaussLegendrePanels,
            tail_mode: TailMode::Mapped,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.cutoff > 1.0 && self.cutoff.is_finite()) {
            return Err(OracleError::InvalidConfig(format!(
                "cutoff {} must exceed 1",
                self.cutoff
            )));
        }
        if self.points_per_axis < 32 {
            return Err(OracleError::InvalidConfig(format!(
                "points_per_axis {} must be at least 32",
                self.points_per_axis
            )));
        }
        Ok(())
    }

    fn panel_count(&self) -> usize {
        DYADIC_LEVELS as usize + 1 + (self.cutoff - 1.0).ceil() as usize + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    /// Contribution (or, in analytic mode, bound) from beyond the cutoff.
    pub tail: f64,
}

struct AxisRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panel_points: usize,
}

fn push_rule(axis: &mut AxisRule, rule: &Rule) {
    axis.nodes.extend_from_slice(&rule.nodes);
    axis.weights.extend_from_slice(&rule.weights);
}

fn push_tail(axis: &mut AxisRule, cutoff: f64, n: usize) {
    // ∫_S^∞ f(s) ds = ∫_0^1 f(S/u) S/u² du
    let r = gauss_legendre(n).mapped(0.0, 1.0);
    for (&u, &w) in r.nodes.iter().zip(&r.weights) {
        axis.nodes.push(cutoff / u);
        axis.weights.push(w * cutoff / (u * u));
    }
}

fn axis_rule(config: &QuadratureConfig, points: usize, with_tail: bool) -> AxisRule {
    let mut axis = AxisRule {
        nodes: Vec::new(),
        weights: Vec::new(),
        panel_points: (points / config.panel_count()).max(4),
    };
    let cut = config.cutoff;
    match config.scheme {
        QuadratureScheme::GaussLegendrePanels => {
            let n = (points / config.panel_count()).max(4);
            let gl = gauss_legendre(n);
            push_rule(&mut axis, &gl.mapped(0.0, 2f64.powi(-DYADIC_LEVELS)));
            for k in (0..DYADIC_LEVELS).rev() {
                push_rule(&mut axis, &gl.mapped(2f64.powi(-k - 1), 2f64.powi(-k)));
            }
            let mut a = 1.0;
            while a < cut {
                let b = (a + 1.0).min(cut);
                push_rule(&mut axis, &gl.mapped(a, b));
                a = b;
            }
            if with_tail {
                push_tail(&mut axis, cut, 2 * n);
            }
        }
        QuadratureScheme::TanhSinh => {
            let levels = (points / 2).max(8);
            let ts = tanh_sinh(4.0 / levels as f64, levels);
            push_rule(&mut axis, &ts.mapped(0.0, cut));
            if with_tail {
                push_tail(&mut axis, cut, (points / 8).max(16));
            }
        }
    }
    axis
}

/// Inner rule over `[cut, ∞)` for an outer node `s > cut`, with panels
/// that grow geometrically away from `t = s`: when both margins coincide the
/// integrand keeps a ridge of unit width along the diagonal.
fn ridge_rule(s: f64, cut: f64, n: usize) -> AxisRule {
    let gl = gauss_legendre(n);
    let mut axis = AxisRule {
        nodes: Vec::new(),
        weights: Vec::new(),
        panel_points: n,
    };
    let (mut b, mut w) = (s, 1.0);
    while b - w > cut {
        push_rule(&mut axis, &gl.mapped(b - w, b));
        b -= w;
        w *= 2.0;
    }
    push_rule(&mut axis, &gl.mapped(cut, b));
    let (mut b, mut w) = (s, 1.0);
    while w < 4.0 * s {
        push_rule(&mut axis, &gl.mapped(b, b + w));
        b += w;
        w *= 2.0;
    }
    push_tail(&mut axis, b, 2 * n);
    axis
}

fn tensor_sum(axis: &AxisRule, cutoff: f64, f: impl Fn(f64, f64) -> f64 + Sync) -> (f64, f64) {
    let rows: Vec<(f64, f64)> = axis
        .nodes
        .par_iter()
        .zip(&axis.weights)
        .map(|(&s, &ws)| {
            let mut inside = 0.0;
            let mut outside = 0.0;
            for (&t, &wt) in axis.nodes.iter().zip(&axis.weights) {
                if s > cutoff && t > cutoff {
                    continue;
                }
                let v = ws * wt * f(s, t);
                if s > cutoff || t > cutoff {
                    outside += v;
                } else {
                    inside += v;
                }
            }
            if s > cutoff {
                let inner = ridge_rule(s, cutoff, axis.panel_points);
                for (&t, &wt) in inner.nodes.iter().zip(&inner.weights) {
                    outside += ws * wt * f(s, t);
                }
            }
            (inside, outside)
        })
        .collect();
    let inside =
        crate::specfun::summation::pairwise_sum(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let outside =
        crate::specfun::summation::pairwise_sum(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    (inside, outside)
}

fn periodic_sum(triple: &CharacteristicTriple, n: usize) -> f64 {
    let h = 2.0 * PI / n as f64;
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = h * (i as f64 + 0.5);
            (0..n)
                .map(|j| triple.integrand(s, h * (j as f64 + 0.5)))
                .sum::<f64>()
        })
        .collect();
    crate::specfun::summation::pairwise_sum(&rows) * h * h / (PI * PI)
}

fn finish(value: f64, half: f64, tail: f64, extra: f64) -> Result<QuadratureResult, OracleError> {
    if tail.abs() > TAIL_DOMINANCE_RATIO * value.abs() && tail.abs() > f64::MIN_POSITIVE {
        return Err(OracleError::TailDominance { tail, value });
    }
    Ok(QuadratureResult {
        value,
        error_estimate: 2.0 * (value - half).abs() + extra + 1e-15 * value.abs(),
        tail,
    })
}

/// `V²(X,Y)` by direct quadrature, with an error estimate from the same rule
/// at half the resolution.
pub fn dcov2_quadrature(
    triple: &CharacteristicTriple,
    config: &QuadratureConfig,
) -> Result<QuadratureResult, OracleError> {
    config.validate()?;
    let truncation = 4.0 * triple.truncation_mass;
    if triple.lattice {
        let n = (config.points_per_axis / 2).max(16);
        let value = periodic_sum(triple, n);
        let half = periodic_sum(triple, n / 2);
        return finish(value, half, 0.0, truncation * value.abs());
    }
    let scale = 2.0 / (PI * PI);
    let f = |s: f64, t: f64| triple.integrand(s, t);
    match config.tail_mode {
        TailMode::Mapped => {
            let (inside, outside) = tensor_sum(
                &axis_rule(config, config.points_per_axis, true),
                config.cutoff,
                f,
            );
            let (hi, ho) = tensor_sum(
                &axis_rule(config, config.points_per_axis / 2, true),
                config.cutoff,
                f,
            );
            let value = scale * (inside + outside);
            finish(
                value,
                scale * (hi + ho),
                scale * outside,
                truncation * value.abs(),
            )
        }
        TailMode::Analytic => {
            let bound = triple.analytic_tail.as_ref().ok_or_else(|| {
                OracleError::Unsupported("no analytic tail bound for this law".into())
            })?;
            let tail = bound(config.cutoff);
            let (inside, _) = tensor_sum(
                &axis_rule(config, config.points_per_axis, false),
                config.cutoff,
                f,
            );
            let (hi, _) = tensor_sum(
                &axis_rule(config, config.points_per_axis / 2, false),
                config.cutoff,
                f,
            );
            let value = scale * inside;
            finish(value, scale * hi, tail, tail + truncation * value.abs())
        }
    }
}

fn ln_sphere_area(dim: u32) -> f64 {
    // |S^{d-1}| = 2 π^{d/2} / Γ(d/2)
    std::f64::consts::LN_2 + 0.5 * f64::from(dim) * PI.ln()
        - ln_gamma(0.5 * f64::from(dim)).expect("positive")
}

fn mvn_diag_sum(p: u32, rho: f64, axis: &AxisRule, angular: &Rule, cutoff: f64) -> (f64, f64) {
    let weights: Vec<f64> = angular
        .nodes
        .iter()
        .zip(&angular.weights)
        .map(|(&phi, &w)| w * phi.sin().powi(p as i32 - 2))
        .collect();
    let cosines: Vec<f64> = angular.nodes.iter().map(|phi| phi.cos()).collect();
    let radial = |r1: f64, r2: f64| -> f64 {
        let g = |a: f64, b: f64| {
            let q = 0.5 * (a * a + b * b);
            cosines
                .iter()
                .zip(&weights)
                .map(|(&u, &w)| {
                    let d = cf::gauss_expm1(q, -rho * a * b * u) / (a * b);
                    w * d * d
                })
                .sum::<f64>()
        };
        let near = |x: f64| x < NEAR_AXIS;
        match (near(r1), near(r2)) {
            (false, false) => g(r1, r2),
            (true, _) => quadratic_limit(r1, 0.0, |x| {
                if near(r2) {
                    quadratic_limit(r2, 0.0, |y| g(x, y))
                } else {
                    g(x, r2)
                }
            }),
            (false, true) => quadratic_limit(r2, 0.0, |y| g(r1, y)),
        }
    };
    tensor_sum(axis, cutoff, radial)
}

/// `Ṽ²` for `N_{2p}` with `Λ_XY = ρ I_p`, reduced by rotational symmetry to
/// a three-dimensional integral over the two radii and the angle between
/// `s` and `t`.
pub fn dcov2_quadrature_mvn_diag(
    p: u32,
    rho: f64,
    config: &QuadratureConfig,
) -> Result<QuadratureResult, OracleError> {
    config.validate()?;
    if p == 0 || rho.abs() > 1.0 {
        return Err(OracleError::InvalidParameter(format!(
            "p = {p}, rho = {rho}"
        )));
    }
    if p == 1 {
        return dcov2_quadrature(&cf_bvn(rho)?, config);
    }
    let g = GammaConstant::new(p).value;
    let scale = (ln_sphere_area(p) + ln_sphere_area(p - 1)).exp() / (g * g);
    let full = axis_rule(config, config.points_per_axis, true);
    let half = axis_rule(config, config.points_per_axis / 2, true);
    let ang = gauss_legendre(ANGULAR_POINTS).mapped(0.0, PI);
    let ang_half = gauss_legendre(ANGULAR_POINTS / 2).mapped(0.0, PI);
    let (i1, o1) = mvn_diag_sum(p, rho, &full, &ang, config.cutoff);
    let (i2, o2) = mvn_diag_sum(p, rho, &half, &ang_half, config.cutoff);
    finish(scale * (i1 + o1), scale * (i2 + o2), scale * o1, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::normal::{
        dcov2_bvn_closed, dcov2_bvn_mixture_closed, dcov2_mvn_diag, dvar_normal_univariate,
    };

    #[test]
    fn bvn_matches_closed_form() {
        let cfg = QuadratureConfig::default();
        for rho in [0.1, 0.5, 0.9] {
            let r = dcov2_quadrature(&cf_bvn(rho).unwrap(), &cfg).unwrap();
            let want = dcov2_bvn_closed(rho);
            assert!(
                (r.value - want).abs() < 1e-9,
                "rho={rho}: {} vs {want}",
                r.value
            );
            assert!(r.error_estimate < 1e-6);
        }
        let r = dcov2_quadrature(&cf_bvn(1.0).unwrap(), &cfg).unwrap();
        assert!((r.value - dvar_normal_univariate()).abs() < 1e-9);
    }

    #[test]
    fn analytic_tail_and_tanh_sinh() {
        let want = dcov2_bvn_mixture_closed(0.7);
        for cfg in [
            QuadratureConfig {
                tail_mode: TailMode::Analytic,
                ..Default::default()
            },
            QuadratureConfig {
                scheme: QuadratureScheme::TanhSinh,
                ..Default::default()
            },
        ] {
            let r = dcov2_quadrature(&cf_mixture_bvn(0.7).unwrap(), &cfg).unwrap();
            assert!(
                (r.value - want).abs() < 1e-9,
                "{cfg:?}: {} vs {want}",
                r.value
            );
        }
        let cfg = QuadratureConfig {
            tail_mode: TailMode::Analytic,
            ..Default::default()
        };
        assert!(matches!(
            dcov2_quadrature(&cf_kibble_gamma(1.0, 0.5).unwrap(), &cfg),
            Err(OracleError::Unsupported(_))
        ));
    }

    #[test]
    fn tail_dominance_is_reported() {
        let cfg = QuadratureConfig {
            cutoff: 1.5,
            ..Default::default()
        };
        let r = dcov2_quadrature(&cf_kibble_gamma(0.2, 0.9).unwrap(), &cfg);
        assert!(matches!(r, Err(OracleError::TailDominance { .. })), "{r:?}");
    }

    #[test]
    fn config_validation() {
        let bad = QuadratureConfig {
            points_per_axis: 16,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = QuadratureConfig {
            cutoff: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mvn_diag_reduction() {
        let cfg = QuadratureConfig {
            points_per_axis: 512,
            ..Default::default()
        };
        for p in [2u32, 3] {
            let r = dcov2_quadrature_mvn_diag(p, 0.6, &cfg).unwrap();
            let want = dcov2_mvn_diag(p, 0.6).unwrap();
            assert!(
                (r.value - want).abs() < 1e-8,
                "p={p}: {} vs {want}",
                r.value
            );
        }
    }

    #[test]
    fn near_axis_is_finite() {
        let tr = cf_kibble_gamma(1.0, 0.5).unwrap();
        for &(s, t) in &[(1e-300, 1.0), (0.0, 0.0), (1e-9, 3.0), (2.0, 1e-12)] {
            assert!(tr.integrand(s, t).is_finite());
        }
    }
}
