//! Population `V²` and distance correlation for each supported family.

pub mod gamma;
mod lattice;
pub mod mvn;
pub mod negbin;
pub mod normal;
pub mod poisson;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{self, OracleError, QuadratureConfig};
use crate::series::{MatrixSeriesOptions, SeriesError, SeriesEvaluation, SeriesOptions};
use crate::specfun::SpecfunError;

pub use gamma::{
    dcov2_gamma, dvar_gamma, dvar_gamma_from_table, gamma_a_coefficient,
    gamma_marginal_coefficient, Extrapolation, GammaDiagonalTable, GammaProvider,
};
pub use mvn::{dcov2_mvn_general, spectral_norm, MvnProvider};
pub use negbin::{
    dcov2_negbinomial, negbin_a_coefficient, negbin_marginal_coefficient, NegBinProvider,
};
pub use normal::{
    dcov2_bvn_closed, dcov2_bvn_generalized, dcov2_bvn_generalized_with, dcov2_bvn_mixture_closed,
    dcov2_bvn_series, dcov2_bvn_series_with, dcov2_mvn_diag, dvar_mvn, dvar_normal_univariate,
    geometric_cap, HermiteProvider,
};
pub use poisson::{
    dcov2_poisson, dvar_poisson, poisson_a_coefficient, poisson_marginal_coefficient,
    PoissonProvider,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PopulationError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub(crate) fn check_range(
    name: &str,
    value: f64,
    ok: bool,
    requirement: &str,
) -> Result<(), PopulationError> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(PopulationError::InvalidParameter(format!(
            "{name} = {value} violates {requirement}"
        )))
    }
}

/// Lancaster correlation sequence `n ↦ ρ_n` for [`DistributionSpec::GeneralizedBvn`].
#[derive(Clone)]
pub struct RhoSequence(pub Arc<dyn Fn(u64) -> f64 + Send + Sync>);

impl RhoSequence {
    pub fn new(f: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn at(&self, n: u64) -> f64 {
        (self.0)(n)
    }
}

impl fmt::Debug for RhoSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<f64> = (1..=4).map(|n| self.at(n)).collect();
        write!(f, "RhoSequence({head:?}, ..)")
    }
}

/// A bivariate (or, for the normal, multivariate) law with Lancaster
/// structure.  Build through the checked constructors.
#[derive(Clone, Debug)]
pub enum DistributionSpec {
    BivariateNormal {
        rho: f64,
    },
    GeneralizedBvn {
        rho_seq: RhoSequence,
    },
    MixtureBvn {
        rho: f64,
    },
    /// `N_{p+q}` with whitened cross-correlation `Λ_XY` (`p × q`).
    MultivariateNormal {
        lambda_xy: DMatrix<f64>,
    },
    /// Sarmanov gamma, shapes `α ≥ β`; `α = β` is Kibble–Moran.
    BivariateGamma {
        alpha: f64,
        beta: f64,
        lambda: f64,
    },
    BivariatePoisson {
        a: f64,
        lambda: f64,
    },
    BivariateNegBinomial {
        beta: f64,
        c: f64,
        lambda: f64,
    },
}

impl DistributionSpec {
    pub fn bivariate_normal(rho: f64) -> Result<Self, PopulationError> {
        let s = Self::BivariateNormal { rho };
        s.validate()?;
        Ok(s)
    }

    pub fn generalized_bvn(rho_seq: RhoSequence) -> Self {
        Self::GeneralizedBvn { rho_seq }
    }

    pub fn mixture_bvn(rho: f64) -> Result<Self, PopulationError> {
        let s = Self::MixtureBvn { rho };
        s.validate()?;
        Ok(s)
    }

    pub fn multivariate_normal(lambda_xy: DMatrix<f64>) -> Result<Self, PopulationError> {
        let s = Self::MultivariateNormal { lambda_xy };
        s.validate()?;
        Ok(s)
    }

    pub fn bivariate_gamma(alpha: f64, beta: f64, lambda: f64) -> Result<Self, PopulationError> {
        let s = Self::BivariateGamma {
            alpha,
            beta,
            lambda,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn bivariate_poisson(a: f64, lambda: f64) -> Result<Self, PopulationError> {
        let s = Self::BivariatePoisson { a, lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn bivariate_negbinomial(beta: f64, c: f64, lambda: f64) -> Result<Self, PopulationError> {
        let s = Self::BivariateNegBinomial { beta, c, lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::BivariateNormal { .. } => "bvn",
            Self::GeneralizedBvn { .. } => "generalized-bvn",
            Self::MixtureBvn { .. } => "mixture-bvn",
            Self::MultivariateNormal { .. } => "mvn",
            Self::BivariateGamma { .. } => "gamma",
            Self::BivariatePoisson { .. } => "poisson",
            Self::BivariateNegBinomial { .. } => "negbin",
        }
    }

    pub fn validate(&self) -> Result<(), PopulationError> {
        match self {
            Self::BivariateNormal { rho } | Self::MixtureBvn { rho } => {
                check_range("rho", *rho, rho.abs() < 1.0, "|rho| < 1")
            }
            Self::GeneralizedBvn { .. } => Ok(()),
            Self::MultivariateNormal { lambda_xy } => {
                let (p, q) = lambda_xy.shape();
                check_range("p", p as f64, p >= 1 && q >= 1, "non-empty lambda_xy")?;
                let norm = spectral_norm(lambda_xy);
                check_range("lambda_xy", norm, norm < 1.0, "spectral norm < 1")
            }
            Self::BivariateGamma {
                alpha,
                beta,
                lambda,
            } => {
                check_range(
                    "alpha",
                    *alpha,
                    *alpha > 0.0 && alpha.is_finite(),
                    "alpha > 0",
                )?;
                check_range(
                    "beta",
                    *beta,
                    *beta > 0.0 && beta <= alpha,
                    "0 < beta <= alpha",
                )?;
                check_range(
                    "lambda",
                    *lambda,
                    (0.0..1.0).contains(lambda),
                    "0 <= lambda < 1",
                )
            }
            Self::BivariatePoisson { a, lambda } => {
                check_range("a", *a, *a > 0.0 && a.is_finite(), "a > 0")?;
                check_range(
                    "lambda",
                    *lambda,
                    (0.0..=1.0).contains(lambda),
                    "0 <= lambda <= 1",
                )
            }
            Self::BivariateNegBinomial { beta, c, lambda } => negbin::validate(*beta, *c, *lambda),
        }
    }
}

/// How a reported `V²` component was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Series,
    ClosedForm,
    Extrapolation,
    Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentDiagnostics {
    pub method: Method,
    pub evaluation: SeriesEvaluation,
}

impl ComponentDiagnostics {
    fn closed(value: f64) -> Self {
        Self {
            method: Method::ClosedForm,
            evaluation: SeriesEvaluation::exact(value),
        }
    }

    fn series(evaluation: SeriesEvaluation) -> Self {
        Self {
            method: Method::Series,
            evaluation,
        }
    }

    fn estimate(method: Method, value: f64, error: f64) -> Self {
        Self {
            method,
            evaluation: SeriesEvaluation {
                tail_bound: error,
                ..SeriesEvaluation::exact(value)
            },
        }
    }

    pub fn value(&self) -> f64 {
        self.evaluation.value
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub xy: ComponentDiagnostics,
    pub xx: ComponentDiagnostics,
    pub yy: ComponentDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcorSummary {
    pub v2_xy: f64,
    pub v2_xx: f64,
    pub v2_yy: f64,
    /// `None` when a distance variance is not available to full accuracy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub diagnostics: Diagnostics,
}

/// `R = √(V²_xy / √(V²_xx V²_yy))`, clamped to `[0, 1]`.
pub fn dcor_from_components(v2_xy: f64, v2_xx: f64, v2_yy: f64) -> f64 {
    if v2_xy <= 0.0 || v2_xx <= 0.0 || v2_yy <= 0.0 {
        return 0.0;
    }
    (v2_xy / (v2_xx * v2_yy).sqrt()).sqrt().clamp(0.0, 1.0)
}

fn summarize(
    xy: ComponentDiagnostics,
    xx: ComponentDiagnostics,
    yy: ComponentDiagnostics,
) -> DcorSummary {
    DcorSummary {
        v2_xy: xy.value(),
        v2_xx: xx.value(),
        v2_yy: yy.value(),
        r: Some(dcor_from_components(xy.value(), xx.value(), yy.value())),
        note: None,
        diagnostics: Diagnostics { xy, xx, yy },
    }
}

/// Largest `λ` at which the Kibble–Moran series is summed term by term;
/// closer to one the precomputed diagonal table with its fitted tail is used.
pub const GAMMA_DIRECT_LIMIT: f64 = 0.9;

/// Kibble–Moran `V²(X,Y)` through the table where the direct series is slow.
pub fn dcov2_gamma_equal_shapes(
    table: &GammaDiagonalTable,
    lambda: f64,
    tol: f64,
) -> Result<ComponentDiagnostics, PopulationError> {
    if lambda <= GAMMA_DIRECT_LIMIT {
        Ok(ComponentDiagnostics::series(dcov2_gamma(
            table.alpha,
            table.alpha,
            lambda,
            tol,
        )?))
    } else {
        Ok(ComponentDiagnostics::series(table.dcov2(lambda)))
    }
}

/// Distance correlation of the Kibble–Moran bivariate gamma.
pub fn dcor_gamma(alpha: f64, lambda: f64, tol: f64) -> Result<DcorSummary, PopulationError> {
    check_range(
        "lambda",
        lambda,
        (0.0..1.0).contains(&lambda),
        "0 <= lambda < 1",
    )?;
    let table = GammaDiagonalTable::new(alpha, gamma::DEFAULT_TABLE_LEN)?;
    let ex = dvar_gamma_from_table(&table);
    let var = ComponentDiagnostics::estimate(Method::Extrapolation, ex.value, ex.error_estimate);
    Ok(summarize(
        dcov2_gamma_equal_shapes(&table, lambda, tol)?,
        var,
        var,
    ))
}

/// `V²(X,X)` for a negative binomial margin, by quadrature over one period.
pub fn dvar_negbinomial(beta: f64, c: f64) -> Result<oracle::QuadratureResult, PopulationError> {
    negbin::validate(beta, c, 0.0)?;
    Ok(oracle::dcov2_quadrature(
        &oracle::cf_negbinomial_identical(beta, c)?,
        &QuadratureConfig::default(),
    )?)
}

/// Population `V²(X,Y)`, `V²(X,X)`, `V²(Y,Y)` and the distance correlation.
pub fn dcor(spec: &DistributionSpec, tol: f64) -> Result<DcorSummary, PopulationError> {
    spec.validate()?;
    check_range("tol", tol, tol > 0.0 && tol < 1.0, "0 < tol < 1")?;
    let normal = ComponentDiagnostics::closed(dvar_normal_univariate());
    match spec {
        DistributionSpec::BivariateNormal { rho } => Ok(summarize(
            ComponentDiagnostics::series(dcov2_bvn_series(*rho, tol)?),
            normal,
            normal,
        )),
        DistributionSpec::GeneralizedBvn { rho_seq } => {
            let f = |n: u64| rho_seq.at(n);
            Ok(summarize(
                ComponentDiagnostics::series(dcov2_bvn_generalized(&f, tol)?),
                normal,
                normal,
            ))
        }
        DistributionSpec::MixtureBvn { rho } => {
            let r = *rho;
            let f = move |n: u64| if n % 2 == 0 { r.powi(n as i32) } else { 0.0 };
            let options = SeriesOptions {
                tol_rel: tol,
                cap: geometric_cap(r, tol),
            };
            Ok(summarize(
                ComponentDiagnostics::series(dcov2_bvn_generalized_with(&f, options)?),
                normal,
                normal,
            ))
        }
        DistributionSpec::MultivariateNormal { lambda_xy } => {
            let (p, q) = lambda_xy.shape();
            let xy = dcov2_mvn_general(lambda_xy, MatrixSeriesOptions::default())?;
            Ok(summarize(
                ComponentDiagnostics::series(xy),
                ComponentDiagnostics::closed(dvar_mvn(p as u32)?),
                ComponentDiagnostics::closed(dvar_mvn(q as u32)?),
            ))
        }
        DistributionSpec::BivariateGamma {
            alpha,
            beta,
            lambda,
        } if alpha == beta => dcor_gamma(*alpha, *lambda, tol),
        DistributionSpec::BivariateGamma {
            alpha,
            beta,
            lambda,
        } => {
            let xy = ComponentDiagnostics::series(dcov2_gamma(*alpha, *beta, *lambda, tol)?);
            let (ex, ey) = (dvar_gamma(*alpha)?, dvar_gamma(*beta)?);
            let mut summary = summarize(
                xy,
                ComponentDiagnostics::estimate(Method::Extrapolation, ex.value, ex.error_estimate),
                ComponentDiagnostics::estimate(Method::Extrapolation, ey.value, ey.error_estimate),
            );
            summary.r = None;
            summary.note = Some("r is not reported for gamma margins with alpha != beta".into());
            Ok(summary)
        }
        DistributionSpec::BivariatePoisson { a, lambda } => {
            let var = ComponentDiagnostics::series(dvar_poisson(*a, tol)?);
            Ok(summarize(
                ComponentDiagnostics::series(dcov2_poisson(*a, *lambda, tol)?),
                var,
                var,
            ))
        }
        DistributionSpec::BivariateNegBinomial { beta, c, lambda } => {
            let q = dvar_negbinomial(*beta, *c)?;
            let var = ComponentDiagnostics::estimate(Method::Quadrature, q.value, q.error_estimate);
            Ok(summarize(
                ComponentDiagnostics::series(dcov2_negbinomial(*beta, *c, *lambda, tol)?),
                var,
                var,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_validate() {
        assert!(DistributionSpec::bivariate_normal(1.0).is_err());
        assert!(DistributionSpec::bivariate_gamma(1.0, 2.0, 0.5).is_err());
        assert!(DistributionSpec::bivariate_poisson(1.0, 1.0).is_ok());
        assert!(DistributionSpec::bivariate_negbinomial(1.0, 0.3, 1.0).is_err());
        assert!(DistributionSpec::multivariate_normal(DMatrix::from_element(1, 1, 1.0)).is_err());
    }

    #[test]
    fn bvn_summary() {
        let spec = DistributionSpec::bivariate_normal(0.5).unwrap();
        let s = dcor(&spec, 1e-12).unwrap();
        let want = (dcov2_bvn_closed(0.5) / dvar_normal_univariate()).sqrt();
        assert!((s.r.unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn unequal_gamma_omits_r() {
        let spec = DistributionSpec::bivariate_gamma(2.0, 1.0, 0.5).unwrap();
        let s = dcor(&spec, 1e-10).unwrap();
        assert!(s.r.is_none() && s.note.is_some());
        assert!(s.v2_xy > 0.0 && s.v2_xx > 0.0 && s.v2_yy > 0.0);
    }

    #[test]
    fn exponential_variance_is_one_third() {
        let s = dcor_gamma(1.0, 0.5, 1e-12).unwrap();
        assert!((s.v2_xx - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn negbin_variance_matches_series_limit() {
        // λ → 1 limit of the series, through the Poisson-like check on dominance
        let q = dvar_negbinomial(1.0, 0.3).unwrap();
        let v = dcov2_negbinomial(1.0, 0.3, 0.9, 1e-12).unwrap().value;
        assert!(q.value > v && q.error_estimate < 1e-10);
    }
}
