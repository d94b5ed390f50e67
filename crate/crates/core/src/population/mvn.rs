//! Affinely invariant distance covariance of a general multivariate normal.

use nalgebra::DMatrix;

use super::{check_range, PopulationError};
use crate::series::{
    eval_matrix_index_series, MatrixCoefficientProvider, MatrixSeriesOptions, SeriesEvaluation,
};
use crate::specfun::{ln_factorial, ln_gamma};

/// Coefficients over `p×q` index matrices for a whitened cross-correlation
/// matrix `Λ_XY`.
#[derive(Clone, Debug)]
pub struct MvnProvider {
    p: usize,
    q: usize,
    lambda: Vec<f64>,
}

impl MvnProvider {
    pub fn new(lambda_xy: &DMatrix<f64>) -> Self {
        let (p, q) = lambda_xy.shape();
        let lambda = (0..p)
            .flat_map(|r| (0..q).map(move |c| (r, c)))
            .map(|(r, c)| lambda_xy[(r, c)])
            .collect();
        Self { p, q, lambda }
    }

    fn margin_coefficient(&self, sums: impl Iterator<Item = u32>, total: u32, dim: usize) -> f64 {
        let t = f64::from(total);
        let mut ln = ln_gamma(0.5 * (t - 1.0)).expect("total >= 2")
            - ln_gamma(0.5 * t + 0.5 * dim as f64).expect("positive");
        for s in sums {
            ln += ln_gamma(0.5 * (f64::from(s) + 1.0)).expect("positive");
        }
        ln.exp()
    }

    /// `A` (rows, dimension `p`) and `B` (columns, dimension `q`) for a sum
    /// matrix `S = J + K`; both depend on `J` and `K` only through `S`.
    fn coefficients(&self, s: &[u32]) -> (f64, f64) {
        let (p, q) = (self.p, self.q);
        let total: u32 = s.iter().sum();
        let rows = (0..p).map(|r| (0..q).map(|c| s[r * q + c]).sum::<u32>());
        let cols = (0..q).map(|c| (0..p).map(|r| s[r * q + c]).sum::<u32>());
        (
            self.margin_coefficient(rows, total, p),
            self.margin_coefficient(cols, total, q),
        )
    }

    fn ln_power_over_factorial(&self, n: &[u32]) -> Option<(f64, bool)> {
        let mut ln = 0.0;
        let mut negative = false;
        for (&e, &l) in n.iter().zip(&self.lambda) {
            if e == 0 {
                continue;
            }
            if l == 0.0 {
                return None;
            }
            ln += f64::from(e) * l.abs().ln() - ln_factorial(u64::from(e));
            negative ^= l < 0.0 && e % 2 == 1;
        }
        Some((ln, negative))
    }
}

impl MatrixCoefficientProvider for MvnProvider {
    fn shape(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    fn support(&self) -> Vec<bool> {
        self.lambda.iter().map(|&l| l != 0.0).collect()
    }

    fn rho(&self, n: &[u32]) -> f64 {
        match self.ln_power_over_factorial(n) {
            Some((ln, neg)) => {
                let v = ln.exp();
                if neg {
                    -v
                } else {
                    v
                }
            }
            None => 0.0,
        }
    }

    fn a(&self, j: &[u32], k: &[u32]) -> f64 {
        let s: Vec<u32> = j.iter().zip(k).map(|(a, b)| a + b).collect();
        self.coefficients(&s).0
    }

    fn b(&self, j: &[u32], k: &[u32]) -> f64 {
        let s: Vec<u32> = j.iter().zip(k).map(|(a, b)| a + b).collect();
        self.coefficients(&s).1
    }

    fn grouped(&self, s: &[u32]) -> Option<f64> {
        // Σ_{J+K=S} 1/(J! K!) = 2^{|S|}/S!, minus the two splits with a zero part
        let (ln, neg) = self.ln_power_over_factorial(s)?;
        let total: u32 = s.iter().sum();
        let splits = (f64::from(total) * std::f64::consts::LN_2).exp_m1() - 1.0;
        let (a, b) = self.coefficients(s);
        let v = ln.exp() * splits * a * b;
        Some(if neg { -v } else { v })
    }
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// `Ṽ²(X,Y)` by the matrix-index series, enumerated up to `options.degree_cap`.
pub fn dcov2_mvn_general(
    lambda_xy: &DMatrix<f64>,
    options: MatrixSeriesOptions,
) -> Result<SeriesEvaluation, PopulationError> {
    let (p, q) = lambda_xy.shape();
    check_range("p", p as f64, p >= 1 && q >= 1, "non-empty lambda_xy")?;
    check_range(
        "lambda_xy",
        spectral_norm(lambda_xy),
        spectral_norm(lambda_xy) < 1.0 && lambda_xy.iter().all(|v| v.is_finite()),
        "spectral norm < 1",
    )?;
    if lambda_xy.iter().all(|&v| v == 0.0) {
        return Ok(SeriesEvaluation::exact(0.0));
    }
    Ok(eval_matrix_index_series(
        &MvnProvider::new(lambda_xy),
        options,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::normal::{dcov2_bvn_closed, dcov2_mvn_diag};
    use crate::series::MatrixEnumeration;

    #[test]
    fn one_by_one_is_bivariate_normal() {
        let m = DMatrix::from_element(1, 1, 0.5);
        let ev = dcov2_mvn_general(&m, MatrixSeriesOptions::default()).unwrap();
        assert!((ev.value - dcov2_bvn_closed(0.5)).abs() < 1e-6_f64.max(ev.tail_bound));
    }

    #[test]
    fn grouped_equals_pairs() {
        let m = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, -0.2, 0.3]);
        let opts = MatrixSeriesOptions {
            degree_cap: 8,
            ..Default::default()
        };
        let g = dcov2_mvn_general(&m, opts).unwrap();
        let p = dcov2_mvn_general(
            &m,
            MatrixSeriesOptions {
                enumeration: MatrixEnumeration::Pairs,
                ..opts
            },
        )
        .unwrap();
        assert!((g.value - p.value).abs() < 1e-14 * g.value.abs().max(1e-300));
    }

    #[test]
    fn diagonal_two_by_two() {
        let m = DMatrix::from_diagonal_element(2, 2, 0.5);
        let ev = dcov2_mvn_general(&m, MatrixSeriesOptions::default()).unwrap();
        let want = dcov2_mvn_diag(2, 0.5).unwrap();
        assert!((ev.value - want).abs() < 1e-6_f64.max(ev.tail_bound));
    }

    #[test]
    fn zero_and_invalid() {
        let z = DMatrix::zeros(2, 3);
        assert_eq!(
            dcov2_mvn_general(&z, MatrixSeriesOptions::default())
                .unwrap()
                .value,
            0.0
        );
        let big = DMatrix::from_diagonal_element(2, 2, 1.0);
        assert!(dcov2_mvn_general(&big, MatrixSeriesOptions::default()).is_err());
    }
}
