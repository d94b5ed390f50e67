//! Evaluation of Lancaster double series
//! `V² = (1/γ_p γ_q) Σ_{j,k≥1} ρ_j ρ_k A_{j,k} B_{j,k}`
//! by anti-diagonals, with a geometric tail estimate.

mod matrix;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specfun::summation::{pairwise_sum, CompensatedSum};
use crate::specfun::{ln_gamma, SpecfunError};

pub use matrix::{
    eval_matrix_index_series, MatrixCoefficientProvider, MatrixEnumeration, MatrixSeriesOptions,
};

/// Default relative stop tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default largest anti-diagonal `j + k` for scalar series.
pub const DEFAULT_SCALAR_CAP: u64 = 400;
/// Default largest total degree `|J| + |K|` for matrix series.
pub const DEFAULT_DEGREE_CAP: u32 = 14;
/// Consecutive small diagonals required by the stop test.
pub const STOP_RUN: usize = 5;

/// `γ_p = π^{(p+1)/2} / Γ((p+1)/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaConstant {
    pub p: u32,
    pub value: f64,
}

impl GammaConstant {
    /// Also accepts `p = 0` (value 1), which appears in the normal-family
    /// closed forms.
    pub fn new(p: u32) -> Self {
        let h = 0.5 * (f64::from(p) + 1.0);
        let value = match p {
            0 => 1.0,
            1 => PI,
            2 => 2.0 * PI,
            _ => (h * PI.ln() - ln_gamma(h).expect("positive")).exp(),
        };
        Self { p, value }
    }
}

/// A truncated series value with its truncation diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesEvaluation {
    pub value: f64,
    /// Largest `j + k` (or total degree) included.
    pub max_index: u64,
    pub terms_used: u64,
    /// Estimated absolute truncation error.
    pub tail_bound: f64,
    pub converged: bool,
}

impl SeriesEvaluation {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            max_index: 0,
            terms_used: u64::from(value != 0.0),
            tail_bound: 0.0,
            converged: true,
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.value *= factor;
        self.tail_bound *= factor.abs();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("series not converged at index {} (partial value {}, tail estimate {})", .partial.max_index, .partial.value, .partial.tail_bound)]
    NonConvergence { partial: SeriesEvaluation },
    #[error("enumeration needs more than {limit} terms")]
    Capacity { limit: u64 },
    #[error("invalid series argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

impl SeriesError {
    /// Best available value, including the partial sum of an unconverged series.
    pub fn partial(&self) -> Option<SeriesEvaluation> {
        match self {
            SeriesError::NonConvergence { partial } => Some(*partial),
            _ => None,
        }
    }
}

/// How the index set of a family is organised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexKind {
    Scalar,
    Matrix { p: usize, q: usize },
}

/// Family-specific pieces of a scalar-index Lancaster series.
///
/// `rho(0)` is 1 by convention and never summed.  Providers must be pure;
/// the engine may call them from several threads.
pub trait CoefficientProvider: Sync {
    fn rho(&self, j: u64) -> f64;
    fn a(&self, j: u64, k: u64) -> f64;
    fn b(&self, j: u64, k: u64) -> f64;

    fn index_kind(&self) -> IndexKind {
        IndexKind::Scalar
    }

    /// Terms `ρ_j ρ_k A_{j,k} B_{j,k}` along `j + k = d`, ordered by `j`.
    fn diagonal_terms(&self, d: u64) -> Result<Vec<f64>, SpecfunError> {
        let term = |j: u64| {
            let k = d - j;
            let w = self.rho(j) * self.rho(k);
            if w == 0.0 {
                0.0
            } else {
                w * self.a(j, k) * self.b(j, k)
            }
        };
        Ok(if d > 64 {
            (1..d).into_par_iter().map(term).collect()
        } else {
            (1..d).map(term).collect()
        })
    }
}

/// Stop rule and cap for [`eval_double_series`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub tol_rel: f64,
    pub cap: u64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tol_rel: DEFAULT_TOL,
            cap: DEFAULT_SCALAR_CAP,
        }
    }
}

impl SeriesOptions {
    pub fn with_tol(tol_rel: f64) -> Self {
        Self {
            tol_rel,
            ..Self::default()
        }
    }
}

/// Running state shared by every diagonal-ordered summation.
#[derive(Clone, Debug)]
pub struct DiagonalAccumulator {
    tol_rel: f64,
    sum: CompensatedSum,
    small_run: usize,
    last_nonzero: Option<f64>,
    prev_nonzero: Option<f64>,
    zeros_since_nonzero: usize,
    max_index: u64,
    terms_used: u64,
    partial_sums: Vec<f64>,
}

impl DiagonalAccumulator {
    pub fn new(tol_rel: f64) -> Self {
        Self {
            tol_rel,
            sum: CompensatedSum::new(),
            small_run: 0,
            last_nonzero: None,
            prev_nonzero: None,
            zeros_since_nonzero: 0,
            max_index: 0,
            terms_used: 0,
            partial_sums: Vec::new(),
        }
    }

    /// Adds one diagonal total; returns `true` once the stop test is met.
    pub fn push(&mut self, index: u64, total: f64, terms: u64) -> bool {
        self.sum.add(total);
        self.max_index = index;
        self.terms_used += terms;
        self.partial_sums.push(self.sum.value());
        if total != 0.0 {
            self.prev_nonzero = self.last_nonzero;
            self.last_nonzero = Some(total);
            self.zeros_since_nonzero = 0;
        } else {
            self.zeros_since_nonzero += 1;
        }
        if total.abs() < self.tol_rel * self.sum.value().abs() || total == 0.0 {
            self.small_run += 1;
        } else {
            self.small_run = 0;
        }
        self.small_run >= STOP_RUN && self.tail_within_tolerance()
    }

    fn tail_within_tolerance(&self) -> bool {
        self.tail_estimate()
            .is_some_and(|t| t <= self.tol_rel * self.sum.value().abs() || t == 0.0)
    }

    pub fn value(&self) -> f64 {
        self.sum.value()
    }

    /// Partial sums after each diagonal, in order.
    pub fn partial_sums(&self) -> &[f64] {
        &self.partial_sums
    }

    /// Geometric tail `|last| r/(1-r)` with `r = last/previous nonzero`;
    /// `None` when the ratio does not indicate decay.
    pub fn tail_estimate(&self) -> Option<f64> {
        match (self.last_nonzero, self.prev_nonzero) {
            (None, _) => Some(0.0),
            (Some(_), None) => (self.zeros_since_nonzero >= STOP_RUN).then_some(0.0),
            (Some(last), Some(prev)) => {
                let r = (last / prev).abs();
                (r < 1.0).then(|| last.abs() * r / (1.0 - r))
            }
        }
    }

    pub fn finish(&self, stop_met: bool) -> SeriesEvaluation {
        let value = self.value();
        let tail = self.tail_estimate();
        let tail_bound = tail.unwrap_or(f64::INFINITY);
        let converged = stop_met && self.tail_within_tolerance();
        SeriesEvaluation {
            value,
            max_index: self.max_index,
            terms_used: self.terms_used,
            tail_bound,
            converged,
        }
    }
}

/// Sums the series diagonal by diagonal until five consecutive diagonal
/// totals fall below `tol_rel` times the running sum.
pub fn eval_double_series(
    provider: &dyn CoefficientProvider,
    gamma_p: GammaConstant,
    gamma_q: GammaConstant,
    options: SeriesOptions,
) -> Result<SeriesEvaluation, SeriesError> {
    if !(options.tol_rel > 0.0) {
        return Err(SeriesError::InvalidArgument(
            "tol_rel must be positive".into(),
        ));
    }
    if options.cap < 4 {
        return Err(SeriesError::InvalidArgument(
            "cap must be at least 4".into(),
        ));
    }
    if provider.index_kind() != IndexKind::Scalar {
        return Err(SeriesError::InvalidArgument(
            "matrix-index providers go through eval_matrix_index_series".into(),
        ));
    }
    let scale = 1.0 / (gamma_p.value * gamma_q.value);
    let mut acc = DiagonalAccumulator::new(options.tol_rel);
    for d in 2..=options.cap {
        let terms = provider.diagonal_terms(d)?;
        let nonzero = terms.iter().filter(|t| **t != 0.0).count() as u64;
        if acc.push(d, pairwise_sum(&terms), nonzero) {
            return Ok(acc.finish(true).scaled(scale));
        }
    }
    Err(SeriesError::NonConvergence {
        partial: acc.finish(false).scaled(scale),
    })
}

/// Partial sums of [`eval_double_series`] after each diagonal, unscaled by
/// `1/(γ_p γ_q)`; used to inspect monotonicity.
pub fn diagonal_partial_sums(
    provider: &dyn CoefficientProvider,
    max_diagonal: u64,
) -> Result<Vec<f64>, SeriesError> {
    let mut acc = DiagonalAccumulator::new(0.0);
    for d in 2..=max_diagonal {
        let terms = provider.diagonal_terms(d)?;
        acc.push(d, pairwise_sum(&terms), terms.len() as u64);
    }
    Ok(acc.partial_sums().to_vec())
}

/// `Σ_{j=1}^{n} Σ_{k=1}^{n} ρ_j ρ_k A_{j,k} B_{j,k}` row by row, scaled by
/// `1/(γ_p γ_q)`; a reordering check for [`eval_double_series`].
pub fn sum_by_rows(
    provider: &dyn CoefficientProvider,
    gamma_p: GammaConstant,
    gamma_q: GammaConstant,
    n: u64,
) -> f64 {
    let mut acc = CompensatedSum::new();
    for j in 1..=n {
        for k in 1..=n {
            let w = provider.rho(j) * provider.rho(k);
            if w != 0.0 {
                acc.add(w * provider.a(j, k) * provider.b(j, k));
            }
        }
    }
    acc.value() / (gamma_p.value * gamma_q.value)
}
