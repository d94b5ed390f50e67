//! Scalar special functions with log-scale magnitudes and compensated sums.

pub mod ddouble;
mod gamma;
mod hypergeometric;
mod signed_log;
pub mod summation;

use thiserror::Error;

pub use gamma::{
    double_factorial, gamma_signed, ln_factorial, ln_gamma, recip_gamma_signed, rising_factorial,
    sin_pi,
};
pub use hypergeometric::{
    gauss_2f1_at_one, gauss_2f1_disc, gauss_2f1_disc_with, gauss_2f1_terminating,
    gauss_2f1_terminating_detailed, kummer_1f1, kummer_1f1_with, SummationTier, TerminatingSum,
    DEFAULT_SERIES_TOL, DEFAULT_TERM_CAP, DOUBLE_DOUBLE_THRESHOLD, EXACT_DEGREE_LIMIT,
    EXACT_THRESHOLD,
};
pub use signed_log::SignedLogValue;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecfunError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("series did not converge within {terms} terms (partial sum {partial})")]
    NonConvergence { terms: usize, partial: f64 },
    #[error(
        "cancellation too severe for the available precision (condition number {condition:e})"
    )]
    PrecisionLoss { condition: f64 },
}
