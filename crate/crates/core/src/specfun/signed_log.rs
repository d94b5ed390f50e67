use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul};

use serde::{Deserialize, Serialize};

const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;

/// A real number stored as sign and magnitude on a logarithmic scale.
///
/// The magnitude is held as a binary mantissa in `[1, 2)` with an `i64`
/// exponent, so products of thousands of gamma-sized factors neither
/// overflow nor lose the last bits that a bare `ln|x|` would.  The natural
/// log is available through [`SignedLogValue::log_magnitude`]; zero has
/// sign `0` and log magnitude `-inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedLogValue {
    sign: i8,
    mantissa: f64,
    exponent: i64,
}

impl SignedLogValue {
    pub const ZERO: Self = Self {
        sign: 0,
        mantissa: 0.0,
        exponent: 0,
    };
    pub const ONE: Self = Self {
        sign: 1,
        mantissa: 1.0,
        exponent: 0,
    };

    /// Exact conversion from a finite `f64`.
    pub fn from_real(x: f64) -> Self {
        assert!(x.is_finite(), "SignedLogValue::from_real of non-finite {x}");
        if x == 0.0 {
            return Self::ZERO;
        }
        let (m, e) = libm::frexp(x.abs());
        // frexp gives m in [0.5, 1)
        Self {
            sign: if x > 0.0 { 1 } else { -1 },
            mantissa: 2.0 * m,
            exponent: i64::from(e) - 1,
        }
    }

    /// Builds `sign * exp(ln_abs)`.
    pub fn from_log(ln_abs: f64, sign: i8) -> Self {
        if sign == 0 || ln_abs == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        assert!(ln_abs.is_finite(), "non-finite log magnitude {ln_abs}");
        let e = (ln_abs / std::f64::consts::LN_2).floor();
        let frac = (ln_abs - e * LN2_HI) - e * LN2_LO;
        let mut v = Self {
            sign: sign.signum(),
            mantissa: frac.exp(),
            exponent: e as i64,
        };
        v.normalize();
        v
    }

    fn normalize(&mut self) {
        if self.sign == 0 || self.mantissa == 0.0 {
            *self = Self::ZERO;
            return;
        }
        let (m, e) = libm::frexp(self.mantissa);
        self.mantissa = 2.0 * m;
        self.exponent += i64::from(e) - 1;
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Natural log of the magnitude; `-inf` for zero.
    pub fn log_magnitude(&self) -> f64 {
        if self.sign == 0 {
            return f64::NEG_INFINITY;
        }
        let e = self.exponent as f64;
        e * LN2_HI + (self.mantissa.ln() + e * LN2_LO)
    }

    /// Base-2 exponent of the magnitude (the mantissa lies in `[1, 2)`).
    pub fn exponent2(&self) -> i64 {
        self.exponent
    }

    /// Conversion back to `f64`; overflows to infinity and underflows to zero.
    pub fn to_real(&self) -> f64 {
        if self.sign == 0 {
            return 0.0;
        }
        let e = self.exponent.clamp(-2200, 2200) as i32;
        f64::from(self.sign) * libm::ldexp(self.mantissa, e)
    }

    pub fn abs(&self) -> Self {
        Self {
            sign: self.sign.abs(),
            ..*self
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            sign: -self.sign,
            ..*self
        }
    }

    pub fn recip(&self) -> Self {
        assert!(self.sign != 0, "reciprocal of zero SignedLogValue");
        let mut v = Self {
            sign: self.sign,
            mantissa: 1.0 / self.mantissa,
            exponent: -self.exponent,
        };
        v.normalize();
        v
    }

    pub fn mul_real(&self, x: f64) -> Self {
        *self * Self::from_real(x)
    }

    /// Integer power.
    pub fn powi(&self, n: i64) -> Self {
        if n == 0 {
            return Self::ONE;
        }
        let mut base = if n < 0 { self.recip() } else { *self };
        let mut k = n.unsigned_abs();
        let mut acc = Self::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    /// Square root of a nonnegative value.
    pub fn sqrt(&self) -> Self {
        assert!(self.sign >= 0, "sqrt of negative SignedLogValue");
        if self.sign == 0 {
            return Self::ZERO;
        }
        let (m, e) = if self.exponent.rem_euclid(2) == 0 {
            (self.mantissa, self.exponent)
        } else {
            (2.0 * self.mantissa, self.exponent - 1)
        };
        let mut v = Self {
            sign: 1,
            mantissa: m.sqrt(),
            exponent: e / 2,
        };
        v.normalize();
        v
    }

    /// Real power of a positive value, through the log magnitude.
    pub fn powf(&self, p: f64) -> Self {
        assert!(self.sign > 0, "powf needs a positive SignedLogValue");
        Self::from_log(p * self.log_magnitude(), 1)
    }

    /// Compares magnitudes.
    pub fn cmp_abs(&self, other: &Self) -> Ordering {
        match (self.sign == 0, other.sign == 0) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => self
                .exponent
                .cmp(&other.exponent)
                .then(self.mantissa.total_cmp(&other.mantissa)),
        }
    }
}

impl Mul for SignedLogValue {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.sign == 0 || rhs.sign == 0 {
            return Self::ZERO;
        }
        let mut v = Self {
            sign: self.sign * rhs.sign,
            mantissa: self.mantissa * rhs.mantissa,
            exponent: self.exponent + rhs.exponent,
        };
        v.normalize();
        v
    }
}

impl Div for SignedLogValue {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl From<f64> for SignedLogValue {
    fn from(x: f64) -> Self {
        Self::from_real(x)
    }
}

impl fmt::Display for SignedLogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            s => write!(
                f,
                "{}exp({})",
                if s < 0 { "-" } else { "" },
                self.log_magnitude()
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_has_neg_infinite_log() {
        let z = SignedLogValue::from_real(0.0);
        assert_eq!(z.sign(), 0);
        assert_eq!(z.log_magnitude(), f64::NEG_INFINITY);
        assert_eq!(z.to_real(), 0.0);
    }

    #[test]
    fn round_trip_extremes() {
        for &x in &[
            1e-300,
            -1e-300,
            1e300,
            -3.5e299,
            1.0,
            -0.1,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(SignedLogValue::from_real(x).to_real(), x);
        }
    }

    #[test]
    fn from_log_matches_exp() {
        for &l in &[-700.0, -1.0, 0.0, 0.5, 700.0] {
            let v = SignedLogValue::from_log(l, 1);
            assert!((v.to_real() / f64::exp(l) - 1.0).abs() < 1e-14);
            assert!((v.log_magnitude() - l).abs() <= 1e-15 * l.abs().max(1.0));
        }
    }

    #[test]
    fn huge_products_do_not_overflow() {
        let big = SignedLogValue::from_log(5000.0, 1);
        let r = (big * big) / (big * big.neg());
        assert_eq!(r.sign(), -1);
        assert!((r.to_real() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn sqrt_and_powi() {
        let v = SignedLogValue::from_real(2.0).powi(41);
        assert!((v.sqrt().to_real() - 2f64.powf(20.5)).abs() / 2f64.powf(20.5) < 1e-15);
        assert_eq!(SignedLogValue::from_real(3.0).powi(-2).to_real(), 1.0 / 9.0);
    }
}
