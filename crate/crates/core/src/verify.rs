//! Cross-checks of series values against the quadrature oracle, closed
//! forms, and Monte Carlo estimates.  Shared by the command-line `verify`
//! command and the acceptance harness.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::empirical::{self, EmpiricalError, RngSeed};
use crate::oracle::{self, OracleError, QuadratureConfig};
use crate::population::{self, DistributionSpec, PopulationError};
use crate::series::{MatrixSeriesOptions, DEFAULT_TOL};

/// Floor in the relative discrepancy `|a-b| / max(|a|, |b|, floor)`.
pub const DISCREPANCY_FLOOR: f64 = 1e-12;
pub const BVN_AGREEMENT: f64 = 1e-5;
pub const MC_BAND: f64 = 3.0;
pub const CF_BAND: f64 = 4.0;
pub const ORACLE_REL: f64 = 1e-4;
pub const ORACLE_FLOOR: f64 = 1e-6;
pub const MVN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Empirical(#[from] EmpiricalError),
}

pub fn discrepancy(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(DISCREPANCY_FLOOR)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Absolute,
    Relative,
    StandardErrors,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodValue {
    pub method: String,
    pub value: f64,
    pub error_estimate: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Always `|a-b| / max(|a|, |b|, 1e-12)`.
    pub discrepancy: f64,
    /// The quantity compared against `tolerance`, in units of `measure`.
    pub statistic: f64,
    pub measure: Measure,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn absolute(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let statistic = (lhs - rhs).abs();
        Self::with(name, lhs, rhs, statistic, Measure::Absolute, tolerance)
    }

    /// `|a-b| / max(|a|, |b|, floor) ≤ tolerance`.
    pub fn relative(name: &str, lhs: f64, rhs: f64, tolerance: f64, floor: f64) -> Self {
        let statistic = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(floor);
        Self::with(name, lhs, rhs, statistic, Measure::Relative, tolerance)
    }

    pub fn standard_errors(name: &str, lhs: f64, rhs: f64, se: f64, band: f64) -> Self {
        let statistic = if se > 0.0 {
            (lhs - rhs).abs() / se
        } else {
            f64::INFINITY
        };
        Self::with(name, lhs, rhs, statistic, Measure::StandardErrors, band)
    }

    pub fn predicate(name: &str, lhs: f64, rhs: f64, passed: bool) -> Self {
        let mut c = Self::with(name, lhs, rhs, lhs - rhs, Measure::Absolute, 0.0);
        c.passed = passed;
        c
    }

    fn with(
        name: &str,
        lhs: f64,
        rhs: f64,
        statistic: f64,
        measure: Measure,
        tolerance: f64,
    ) -> Self {
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            discrepancy: discrepancy(lhs, rhs),
            statistic,
            measure,
            tolerance,
            passed: statistic <= tolerance,
        }
    }
}

/// One verified parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub family: String,
    pub parameters: BTreeMap<String, f64>,
    pub values: Vec<MethodValue>,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl PointReport {
    fn new(family: &str, parameters: &[(&str, f64)]) -> Self {
        Self {
            family: family.to_string(),
            parameters: parameters
                .iter()
                .map(|&(k, v)| (k.to_string(), v))
                .collect(),
            values: Vec::new(),
            checks: Vec::new(),
            seconds: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn value(
        &mut self,
        method: &str,
        value: f64,
        error_estimate: Option<f64>,
        started: Instant,
    ) -> f64 {
        self.values.push(MethodValue {
            method: method.to_string(),
            value,
            error_estimate,
            seconds: started.elapsed().as_secs_f64(),
        });
        value
    }

    fn timed<T>(
        &mut self,
        f: impl FnOnce(&mut Self) -> Result<T, VerifyError>,
    ) -> Result<T, VerifyError> {
        let start = Instant::now();
        let out = f(self);
        self.seconds = start.elapsed().as_secs_f64();
        out
    }
}

/// Replicated Monte Carlo settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub n: usize,
    pub replicates: u64,
    pub seed: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self {
            n: 4000,
            replicates: 32,
            seed: 20_240_917,
        }
    }
}

/// Mean and standard error of `V²_n` over independent streams.
pub fn monte_carlo_dcov2(
    spec: &DistributionSpec,
    mc: &MonteCarlo,
) -> Result<(f64, f64), VerifyError> {
    let mut values = Vec::with_capacity(mc.replicates as usize);
    for r in 0..mc.replicates {
        let sm = empirical::sample(spec, mc.n, RngSeed::new(mc.seed, r))?;
        values.push(empirical::dcov2_empirical(&sm));
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok((mean, (var / k).sqrt()))
}

/// Series, closed form and quadrature agree to `1e-5`; optionally the Monte
/// Carlo mean of `V²_n` lies within three standard errors of its exact
/// finite-sample expectation.
pub fn verify_bvn(
    rho: f64,
    quad: &QuadratureConfig,
    mc: Option<&MonteCarlo>,
) -> Result<PointReport, VerifyError> {
    let mut rep = PointReport::new("bvnormal", &[("rho", rho)]);
    rep.timed(|rep| {
        let t = Instant::now();
        let ev = population::dcov2_bvn_series(rho, DEFAULT_TOL)?;
        let series = rep.value("series", ev.value, Some(ev.tail_bound), t);
        let t = Instant::now();
        let closed = rep.value("closed", population::dcov2_bvn_closed(rho), None, t);
        let t = Instant::now();
        let q = oracle::dcov2_quadrature(&oracle::cf_bvn(rho)?, quad)?;
        let quadrature = rep.value("quadrature", q.value, Some(q.error_estimate), t);
        rep.checks.push(Check::absolute(
            "series-closed",
            series,
            closed,
            BVN_AGREEMENT,
        ));
        rep.checks.push(Check::absolute(
            "series-quadrature",
            series,
            quadrature,
            BVN_AGREEMENT,
        ));
        rep.checks.push(Check::absolute(
            "closed-quadrature",
            closed,
            quadrature,
            BVN_AGREEMENT,
        ));
        if let Some(mc) = mc {
            let t = Instant::now();
            let (mean, se) = monte_carlo_dcov2(&DistributionSpec::bivariate_normal(rho)?, mc)?;
            rep.value("monte-carlo", mean, Some(se), t);
            let expected = empirical::expected_vn_bvn(mc.n, rho);
            rep.checks.push(Check::standard_errors(
                "monte-carlo-expectation",
                mean,
                expected,
                se,
                MC_BAND,
            ));
        }
        Ok(())
    })?;
    Ok(rep)
}

/// Series against the generalized-series closed form and the oracle for the
/// `±ρ` normal mixture.
pub fn verify_mixture(rho: f64, quad: &QuadratureConfig) -> Result<PointReport, VerifyError> {
    let mut rep = PointReport::new("mixture", &[("rho", rho)]);
    rep.timed(|rep| {
        let t = Instant::now();
        let s = population::dcor(&DistributionSpec::mixture_bvn(rho)?, DEFAULT_TOL)?;
        let series = rep.value(
            "series",
            s.v2_xy,
            Some(s.diagnostics.xy.evaluation.tail_bound),
            t,
        );
        let t = Instant::now();
        let closed = rep.value("closed", population::dcov2_bvn_mixture_closed(rho), None, t);
        let t = Instant::now();
        let q = oracle::dcov2_quadrature(&oracle::cf_mixture_bvn(rho)?, quad)?;
        let quadrature = rep.value("quadrature", q.value, Some(q.error_estimate), t);
        rep.checks.push(Check::absolute(
            "series-closed",
            series,
            closed,
            BVN_AGREEMENT,
        ));
        rep.checks.push(Check::relative(
            "series-quadrature",
            series,
            quadrature,
            ORACLE_REL,
            ORACLE_FLOOR,
        ));
        Ok(())
    })?;
    Ok(rep)
}

/// The matrix-index series with `Λ = ρ I_p` against the closed form, and for
/// `p = 1` the closed form against the bivariate normal.
pub fn verify_mvn_diag(
    p: u32,
    rho: f64,
    quad: Option<&QuadratureConfig>,
) -> Result<PointReport, VerifyError> {
    let mut rep = PointReport::new("mvn", &[("p", f64::from(p)), ("rho", rho)]);
    rep.timed(|rep| {
        let t = Instant::now();
        let lambda = DMatrix::from_diagonal_element(p as usize, p as usize, rho);
        let ev = population::dcov2_mvn_general(&lambda, MatrixSeriesOptions::default())?;
        let general = rep.value("series", ev.value, Some(ev.tail_bound), t);
        let t = Instant::now();
        let diag = rep.value("closed", population::dcov2_mvn_diag(p, rho)?, None, t);
        rep.checks.push(Check::absolute(
            "series-closed",
            general,
            diag,
            MVN_FLOOR.max(ev.tail_bound),
        ));
        if p == 1 {
            rep.checks.push(Check::absolute(
                "closed-bvn",
                diag,
                population::dcov2_bvn_closed(rho),
                1e-12,
            ));
        }
        if let Some(quad) = quad {
            let t = Instant::now();
            let q = oracle::dcov2_quadrature_mvn_diag(p, rho, quad)?;
            let quadrature = rep.value("quadrature", q.value, Some(q.error_estimate), t);
            rep.checks.push(Check::relative(
                "closed-quadrature",
                diag,
                quadrature,
                ORACLE_REL,
                ORACLE_FLOOR,
            ));
        }
        Ok(())
    })?;
    Ok(rep)
}

fn oracle_point(
    family: &str,
    parameters: &[(&str, f64)],
    series: impl FnOnce() -> Result<crate::SeriesEvaluation, PopulationError>,
    triple: impl FnOnce() -> Result<oracle::CharacteristicTriple, OracleError>,
    quad: &QuadratureConfig,
) -> Result<PointReport, VerifyError> {
    let mut rep = PointReport::new(family, parameters);
    rep.timed(|rep| {
        let t = Instant::now();
        let ev = series()?;
        let s = rep.value("series", ev.value, Some(ev.tail_bound), t);
        let t = Instant::now();
        let q = oracle::dcov2_quadrature(&triple()?, quad)?;
        let v = rep.value("quadrature", q.value, Some(q.error_estimate), t);
        rep.checks.push(Check::relative(
            "series-quadrature",
            s,
            v,
            ORACLE_REL,
            ORACLE_FLOOR,
        ));
        Ok(())
    })?;
    Ok(rep)
}

/// Sarmanov (or, with `α = β`, Kibble–Moran) gamma against the oracle.
pub fn verify_gamma(
    alpha: f64,
    beta: f64,
    lambda: f64,
    quad: &QuadratureConfig,
) -> Result<PointReport, VerifyError> {
    oracle_point(
        "gamma",
        &[("alpha", alpha), ("beta", beta), ("lambda", lambda)],
        || population::dcov2_gamma(alpha, beta, lambda, DEFAULT_TOL),
        || {
            if alpha == beta {
                oracle::cf_kibble_gamma(alpha, lambda)
            } else {
                oracle::cf_sarmanov_gamma(alpha, beta, lambda, 20_000)
            }
        },
        quad,
    )
}

pub fn verify_poisson(
    a: f64,
    lambda: f64,
    quad: &QuadratureConfig,
) -> Result<PointReport, VerifyError> {
    oracle_point(
        "poisson",
        &[("a", a), ("lambda", lambda)],
        || population::dcov2_poisson(a, lambda, DEFAULT_TOL),
        || oracle::cf_bivariate_poisson(a, lambda),
        quad,
    )
}

pub fn verify_negbinomial(
    beta: f64,
    c: f64,
    lambda: f64,
    quad: &QuadratureConfig,
) -> Result<PointReport, VerifyError> {
    oracle_point(
        "negbinomial",
        &[("beta", beta), ("c", c), ("lambda", lambda)],
        || population::dcov2_negbinomial(beta, c, lambda, DEFAULT_TOL),
        || oracle::cf_negbinomial(beta, c, lambda, empirical::NEGBIN_TABLE_TAIL),
        quad,
    )
}

/// Standardized deviations of a sampler's empirical joint cf from the exact
/// cf on a grid; every point must lie within [`CF_BAND`] standard errors.
pub fn verify_sampler_cf(
    spec: &DistributionSpec,
    triple: &oracle::CharacteristicTriple,
    grid: &[f64],
    n: usize,
    seed: RngSeed,
) -> Result<PointReport, VerifyError> {
    let mut rep = PointReport::new(spec.family(), &[("n", n as f64)]);
    rep.timed(|rep| {
        let sm = empirical::sample(spec, n, seed)?;
        for &s in grid {
            for &t in grid {
                let est = empirical::empirical_cf(&sm, s, t);
                let exact = triple.joint(s, t);
                let z = est.z_score(exact);
                rep.checks.push(Check {
                    name: format!("cf({s},{t})"),
                    lhs: est.value.norm(),
                    rhs: exact.norm(),
                    discrepancy: discrepancy(est.value.norm(), exact.norm()),
                    statistic: z,
                    measure: Measure::StandardErrors,
                    tolerance: CF_BAND,
                    passed: z <= CF_BAND,
                });
            }
        }
        Ok(())
    })?;
    Ok(rep)
}

/// Distance correlation of the Kibble–Moran gamma and of the normal on a
/// shared correlation grid (the gamma correlation equals `λ`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figure1 {
    pub rho: Vec<f64>,
    pub dcor_bvn: Vec<f64>,
    pub alphas: Vec<f64>,
    /// One column per entry of `alphas`.
    pub dcor_gamma: Vec<Vec<f64>>,
}

impl Figure1 {
    /// `dcor_gamma - dcor_bvn` for column `i`.
    pub fn difference(&self, i: usize) -> Vec<f64> {
        self.dcor_gamma[i]
            .iter()
            .zip(&self.dcor_bvn)
            .map(|(g, b)| g - b)
            .collect()
    }

    pub fn max_abs_difference(&self, i: usize) -> f64 {
        self.difference(i).iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

pub fn figure1(alphas: &[f64], grid: &[f64]) -> Result<Figure1, PopulationError> {
    for &r in grid {
        if !(0.0..=1.0).contains(&r) {
            return Err(PopulationError::InvalidParameter(format!(
                "grid value {r} outside [0, 1]"
            )));
        }
    }
    let dvar_n = population::dvar_normal_univariate();
    let dcor_bvn = grid
        .iter()
        .map(|&r| population::dcor_from_components(population::dcov2_bvn_closed(r), dvar_n, dvar_n))
        .collect();
    let mut dcor_gamma = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let table =
            population::GammaDiagonalTable::new(alpha, population::gamma::DEFAULT_TABLE_LEN)?;
        let dvar = population::dvar_gamma_from_table(&table).value;
        dcor_gamma.push(
            grid.iter()
                .map(|&l| {
                    if l == 1.0 {
                        1.0
                    } else {
                        population::dcor_from_components(table.dcov2(l).value, dvar, dvar)
                    }
                })
                .collect(),
        );
    }
    Ok(Figure1 {
        rho: grid.to_vec(),
        dcor_bvn,
        alphas: alphas.to_vec(),
        dcor_gamma,
    })
}

/// `start, start + step, …` up to `stop` inclusive, computed as
/// `start + i·step` so that the endpoints are exact.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, PopulationError> {
    if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
        return Err(PopulationError::InvalidParameter(format!(
            "bad grid {start}:{stop}:{step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=count).map(|i| start + i as f64 * step).collect();
    if let Some(last) = g.last_mut() {
        if (*last - stop).abs() < 1e-9 * step {
            *last = stop;
        }
    }
    Ok(g)
}

/// Default acceptance points for each family, as used by `verify` when no
/// points are given.
pub fn preset_points(family: &str) -> Option<Vec<BTreeMap<String, f64>>> {
    let pts = |rows: &[&[(&str, f64)]]| {
        rows.iter()
            .map(|r| r.iter().map(|&(k, v)| (k.to_string(), v)).collect())
            .collect()
    };
    Some(match family {
        "bvnormal" => pts(&[
            &[("rho", 0.1)],
            &[("rho", 0.25)],
            &[("rho", 0.5)],
            &[("rho", 0.75)],
            &[("rho", 0.9)],
        ]),
        "mixture" => pts(&[&[("rho", 0.3)], &[("rho", 0.7)]]),
        "mvn" => pts(&[
            &[("p", 1.0), ("rho", 0.3)],
            &[("p", 1.0), ("rho", 0.6)],
            &[("p", 2.0), ("rho", 0.3)],
            &[("p", 2.0), ("rho", 0.6)],
            &[("p", 3.0), ("rho", 0.3)],
            &[("p", 3.0), ("rho", 0.6)],
        ]),
        "gamma" => pts(&[
            &[("alpha", 1.0), ("beta", 1.0), ("lambda", 0.3)],
            &[("alpha", 1.0), ("beta", 1.0), ("lambda", 0.5)],
            &[("alpha", 1.0), ("beta", 1.0), ("lambda", 0.8)],
        ]),
        "poisson" => pts(&[
            &[("a", 1.0), ("lambda", 0.5)],
            &[("a", 1.0), ("lambda", 1.0)],
        ]),
        "negbinomial" => pts(&[&[("beta", 1.0), ("c", 0.3), ("lambda", 0.4)]]),
        _ => return None,
    })
}

fn param(point: &BTreeMap<String, f64>, key: &str) -> Result<f64, VerifyError> {
    point
        .get(key)
        .copied()
        .ok_or_else(|| PopulationError::InvalidParameter(format!("missing parameter {key}")).into())
}

/// Runs the family's checks at one point.
pub fn verify_point(
    family: &str,
    point: &BTreeMap<String, f64>,
    quad: &QuadratureConfig,
    mc: Option<&MonteCarlo>,
) -> Result<PointReport, VerifyError> {
    match family {
        "bvnormal" => verify_bvn(param(point, "rho")?, quad, mc),
        "mixture" => verify_mixture(param(point, "rho")?, quad),
        "mvn" => {
            let p = param(point, "p")?;
            if p < 1.0 || p.fract() != 0.0 || p > 16.0 {
                return Err(PopulationError::InvalidParameter(format!(
                    "p = {p} must be an integer in 1..=16"
                ))
                .into());
            }
            verify_mvn_diag(p as u32, param(point, "rho")?, Some(quad))
        }
        "gamma" => {
            let alpha = param(point, "alpha")?;
            let beta = point.get("beta").copied().unwrap_or(alpha);
            verify_gamma(alpha, beta, param(point, "lambda")?, quad)
        }
        "poisson" => verify_poisson(param(point, "a")?, param(point, "lambda")?, quad),
        "negbinomial" => verify_negbinomial(
            param(point, "beta")?,
            param(point, "c")?,
            param(point, "lambda")?,
            quad,
        ),
        other => Err(PopulationError::InvalidParameter(format!("unknown family {other}")).into()),
    }
}
