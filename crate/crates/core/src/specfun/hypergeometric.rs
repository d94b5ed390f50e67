//! Gauss and Kummer hypergeometric series for the cases the families need.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::ddouble::DDouble;
use super::gamma::{gamma_signed, recip_gamma_signed};
use super::summation::CompensatedSum;
use super::SpecfunError;

/// Default relative stop tolerance for open-ended series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-12;
/// Default cap on the number of terms of an open-ended series.
pub const DEFAULT_TERM_CAP: usize = 100_000;
/// Condition number above which the terminating sum leaves plain `f64`.
pub const DOUBLE_DOUBLE_THRESHOLD: f64 = 1e6;
/// Condition number above which double-double is not trusted either.
pub const EXACT_THRESHOLD: f64 = 1e16;
/// Largest degree handed to the exact rational tier.
pub const EXACT_DEGREE_LIMIT: u64 = 400;

/// Which arithmetic produced a terminating `₂F₁` value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SummationTier {
    Compensated,
    DoubleDouble,
    ExactRational,
}

/// A terminating `₂F₁` value with its conditioning.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminatingSum {
    pub value: f64,
    /// `Σ|tᵢ| / |Σtᵢ|` measured in the first pass.
    pub condition: f64,
    pub tier: SummationTier,
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Number of nonzero terms after `i = 0` before the series stops on its own.
fn termination_length(m: u64, b: f64) -> u64 {
    if is_nonpositive_integer(b) {
        m.min((-b) as u64)
    } else {
        m
    }
}

/// `₂F₁(-m, b; c; z) = Σ_{i=0}^{m} (-m)_i (b)_i / ((c)_i i!) zⁱ`.
pub fn gauss_2f1_terminating(m: u64, b: f64, c: f64, z: f64) -> Result<f64, SpecfunError> {
    gauss_2f1_terminating_detailed(m, b, c, z).map(|s| s.value)
}

/// As [`gauss_2f1_terminating`], also reporting the condition number and
/// the arithmetic that was needed.
pub fn gauss_2f1_terminating_detailed(
    m: u64,
    b: f64,
    c: f64,
    z: f64,
) -> Result<TerminatingSum, SpecfunError> {
    if !(b.is_finite() && c.is_finite() && z.is_finite()) {
        return Err(SpecfunError::Domain("non-finite ₂F₁ parameter".into()));
    }
    let len = termination_length(m, b);
    for i in 0..len {
        if c + i as f64 == 0.0 {
            return Err(SpecfunError::Domain(format!(
                "(c)_{} vanishes for c = {c} before the series terminates",
                i + 1
            )));
        }
    }
    let mf = m as f64;
    let mut acc = CompensatedSum::new();
    let mut t = 1.0f64;
    acc.add(t);
    for i in 0..len {
        let fi = i as f64;
        t = t * ((fi - mf) * (b + fi)) / ((c + fi) * (fi + 1.0)) * z;
        acc.add(t);
    }
    let condition = acc.condition();
    if condition.is_finite() && condition <= DOUBLE_DOUBLE_THRESHOLD {
        return Ok(TerminatingSum {
            value: acc.value(),
            condition,
            tier: SummationTier::Compensated,
        });
    }
    if condition.is_finite() && condition <= EXACT_THRESHOLD {
        return Ok(TerminatingSum {
            value: terminating_ddouble(len, mf, b, c, z),
            condition,
            tier: SummationTier::DoubleDouble,
        });
    }
    if len > EXACT_DEGREE_LIMIT {
        return Err(SpecfunError::PrecisionLoss { condition });
    }
    Ok(TerminatingSum {
        value: terminating_exact(len, m, b, c, z),
        condition,
        tier: SummationTier::ExactRational,
    })
}

fn terminating_ddouble(len: u64, mf: f64, b: f64, c: f64, z: f64) -> f64 {
    let mut t = DDouble::ONE;
    let mut sum = DDouble::ONE;
    let zd = DDouble::from_f64(z);
    for i in 0..len {
        let fi = i as f64;
        let num = DDouble::from_f64(fi - mf) * (DDouble::from_f64(b) + DDouble::from_f64(fi));
        let den = (DDouble::from_f64(c) + DDouble::from_f64(fi)) * DDouble::from_f64(fi + 1.0);
        t = t * num / den * zd;
        sum = sum + t;
    }
    sum.to_f64()
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

/// Exact sum over the dyadic rationals that the `f64` inputs represent.
fn terminating_exact(len: u64, m: u64, b: f64, c: f64, z: f64) -> f64 {
    let (b, c, z) = (exact(b), exact(c), exact(z));
    let m = BigRational::from_integer(BigInt::from(m));
    let mut t = BigRational::from_integer(BigInt::from(1));
    let mut sum = t.clone();
    for i in 0..len {
        let fi = BigRational::from_integer(BigInt::from(i));
        let num = (&fi - &m) * (&b + &fi) * &z;
        let den = (&c + &fi) * (&fi + BigRational::from_integer(BigInt::from(1)));
        t = t * num / den;
        sum += &t;
    }
    if sum.is_zero() {
        0.0
    } else {
        sum.to_f64().unwrap_or(f64::NAN)
    }
}

/// `₂F₁(a, b; c; z)` for `|z| < 1` by direct summation.
///
/// Stops once `|term| < tol |partial sum|` for five consecutive terms.
pub fn gauss_2f1_disc(a: f64, b: f64, c: f64, z: f64) -> Result<f64, SpecfunError> {
    gauss_2f1_disc_with(a, b, c, z, DEFAULT_SERIES_TOL, DEFAULT_TERM_CAP)
}

pub fn gauss_2f1_disc_with(
    a: f64,
    b: f64,
    c: f64,
    z: f64,
    tol: f64,
    cap: usize,
) -> Result<f64, SpecfunError> {
    if !(z.abs() < 1.0) {
        return Err(SpecfunError::Domain(format!("|z| must be < 1, got {z}")));
    }
    if is_nonpositive_integer(c) {
        return Err(SpecfunError::Domain(format!(
            "c must not be a nonpositive integer, got {c}"
        )));
    }
    let mut acc = CompensatedSum::new();
    let mut t = 1.0f64;
    acc.add(t);
    let mut small = 0;
    for n in 0..cap {
        let fnn = n as f64;
        // (a+n)(b+n) is formed first so that swapping a and b is exact
        let prev = t;
        t = t * ((a + fnn) * (b + fnn)) / ((c + fnn) * (fnn + 1.0)) * z;
        acc.add(t);
        // geometric tail from the current term ratio
        let r = if prev == 0.0 {
            0.0
        } else {
            (t / prev).abs().max(z.abs())
        };
        let tail = if r < 1.0 {
            t.abs() * r / (1.0 - r)
        } else {
            f64::INFINITY
        };
        if t == 0.0 || (t.abs() < tol * acc.value().abs() && tail < tol * acc.value().abs()) {
            small += 1;
            if small >= 5 {
                return Ok(acc.value());
            }
        } else {
            small = 0;
        }
    }
    Err(SpecfunError::NonConvergence {
        terms: cap,
        partial: acc.value(),
    })
}

/// Gauss's value `₂F₁(a, b; c; 1) = Γ(c)Γ(c-a-b) / (Γ(c-a)Γ(c-b))`.
pub fn gauss_2f1_at_one(a: f64, b: f64, c: f64) -> Result<f64, SpecfunError> {
    let s = c - a - b;
    if !(s > 0.0) {
        return Err(SpecfunError::Domain(format!(
            "₂F₁ at 1 needs c - a - b > 0, got {s}"
        )));
    }
    let gc = gamma_signed(c).ok_or_else(|| {
        SpecfunError::Domain(format!("c must not be a nonpositive integer, got {c}"))
    })?;
    let gs = gamma_signed(s).expect("positive argument");
    let v = gc * gs * recip_gamma_signed(c - a) * recip_gamma_signed(c - b);
    Ok(v.to_real())
}

/// Kummer's `₁F₁(a; b; z)`.
///
/// Negative arguments go through `e^z ₁F₁(b-a; b; -z)` so the summed series
/// has terms of one sign whenever `b - a > 0`.
pub fn kummer_1f1(a: f64, b: f64, z: f64) -> Result<f64, SpecfunError> {
    kummer_1f1_with(a, b, z, DEFAULT_SERIES_TOL * 1e-2, DEFAULT_TERM_CAP)
}

pub fn kummer_1f1_with(a: f64, b: f64, z: f64, tol: f64, cap: usize) -> Result<f64, SpecfunError> {
    if is_nonpositive_integer(b) {
        return Err(SpecfunError::Domain(format!(
            "b must not be a nonpositive integer, got {b}"
        )));
    }
    if z == 0.0 || a == 0.0 {
        return Ok(1.0);
    }
    if a == b {
        return Ok(z.exp());
    }
    if z < 0.0 {
        return kummer_series(b - a, b, -z, tol, cap).map(|s| s * z.exp());
    }
    kummer_series(a, b, z, tol, cap)
}

fn kummer_series(a: f64, b: f64, z: f64, tol: f64, cap: usize) -> Result<f64, SpecfunError> {
    let mut acc = CompensatedSum::new();
    let mut t = 1.0f64;
    acc.add(t);
    let mut small = 0;
    for n in 0..cap {
        let fnn = n as f64;
        t = t * (a + fnn) / ((b + fnn) * (fnn + 1.0)) * z;
        acc.add(t);
        if t.abs() < tol * acc.value().abs() || t == 0.0 {
            small += 1;
            if small >= 5 {
                return Ok(acc.value());
            }
        } else {
            small = 0;
        }
    }
    Err(SpecfunError::NonConvergence {
        terms: cap,
        partial: acc.value(),
    })
}
