//! Matrix-indexed series, `Σ_{J,K≠0} ρ_J ρ_K A_{J,K} B_{J,K}` over
//! `p×q` nonnegative integer matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    DiagonalAccumulator, GammaConstant, SeriesError, SeriesEvaluation, DEFAULT_DEGREE_CAP,
};
use crate::specfun::summation::pairwise_sum;

/// Coefficients of a matrix-indexed Lancaster series.  Index matrices are
/// passed row-major as `p*q` slices.
pub trait MatrixCoefficientProvider: Sync {
    fn shape(&self) -> (usize, usize);

    /// Entries that may be nonzero in a contributing index; the rest are
    /// pruned before enumeration.
    fn support(&self) -> Vec<bool> {
        let (p, q) = self.shape();
        vec![true; p * q]
    }

    fn rho(&self, n: &[u32]) -> f64;
    fn a(&self, j: &[u32], k: &[u32]) -> f64;
    fn b(&self, j: &[u32], k: &[u32]) -> f64;

    /// `Σ ρ_J ρ_K A_{J,K} B_{J,K}` over all splits `J + K = S` with both
    /// parts nonzero, if the provider has it in closed form.
    fn grouped(&self, _s: &[u32]) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixEnumeration {
    /// One term per sum matrix `S = J + K`, through [`MatrixCoefficientProvider::grouped`].
    Grouped,
    /// Every pair `(J, K)` separately.
    Pairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSeriesOptions {
    pub degree_cap: u32,
    /// Absolute tail size below which the truncation counts as converged.
    pub abs_tol: f64,
    /// Largest number of index matrices the enumeration may visit.
    pub term_limit: u64,
    pub enumeration: MatrixEnumeration,
}

impl Default for MatrixSeriesOptions {
    fn default() -> Self {
        Self {
            degree_cap: DEFAULT_DEGREE_CAP,
            abs_tol: 1e-6,
            term_limit: 50_000_000,
            enumeration: MatrixEnumeration::Grouped,
        }
    }
}

/// Calls `visit` on every composition of `total` over the positions marked
/// in `support`, in lexicographic order.
fn for_each_composition(
    support: &[bool],
    total: u32,
    visit: &mut dyn FnMut(&[u32]) -> Result<(), SeriesError>,
) -> Result<(), SeriesError> {
    let active: Vec<usize> = (0..support.len()).filter(|&i| support[i]).collect();
    let mut cur = vec![0u32; support.len()];
    fn rec(
        active: &[usize],
        pos: usize,
        left: u32,
        cur: &mut [u32],
        visit: &mut dyn FnMut(&[u32]) -> Result<(), SeriesError>,
    ) -> Result<(), SeriesError> {
        if pos + 1 == active.len() {
            cur[active[pos]] = left;
            visit(cur)?;
            cur[active[pos]] = 0;
            return Ok(());
        }
        for v in 0..=left {
            cur[active[pos]] = v;
            rec(active, pos + 1, left - v, cur, visit)?;
        }
        cur[active[pos]] = 0;
        Ok(())
    }
    if active.is_empty() {
        return Ok(());
    }
    rec(&active, 0, total, &mut cur, visit)
}

fn has_even_margins(s: &[u32], p: usize, q: usize) -> bool {
    (0..p).all(|r| (0..q).map(|c| s[r * q + c]).sum::<u32>() % 2 == 0)
        && (0..q).all(|c| (0..p).map(|r| s[r * q + c]).sum::<u32>() % 2 == 0)
}

fn pairs_total(provider: &dyn MatrixCoefficientProvider, s: &[u32]) -> (f64, u64) {
    let n = s.len();
    let mut j = vec![0u32; n];
    let mut k = s.to_vec();
    let mut terms = Vec::new();
    loop {
        // odometer over 0 <= J <= S
        let mut i = 0;
        while i < n {
            if j[i] < s[i] {
                j[i] += 1;
                k[i] -= 1;
                break;
            }
            j[i] = 0;
            k[i] = s[i];
            i += 1;
        }
        if i == n {
            break;
        }
        if k.iter().all(|&x| x == 0) {
            continue;
        }
        let w = provider.rho(&j) * provider.rho(&k);
        terms.push(if w == 0.0 {
            0.0
        } else {
            w * provider.a(&j, &k) * provider.b(&j, &k)
        });
    }
    let count = terms.len() as u64;
    (pairwise_sum(&terms), count)
}

/// Enumerates index matrices by total degree up to `degree_cap`, keeping
/// only those whose row and column sums of `J + K` are all even.
///
/// The truncation is reported through `tail_bound` (geometric estimate from
/// the last two nonzero degree totals) and `converged = tail_bound <= abs_tol`.
pub fn eval_matrix_index_series(
    provider: &dyn MatrixCoefficientProvider,
    options: MatrixSeriesOptions,
) -> Result<SeriesEvaluation, SeriesError> {
    if options.degree_cap < 2 {
        return Err(SeriesError::InvalidArgument(
            "degree_cap must be at least 2".into(),
        ));
    }
    let (p, q) = provider.shape();
    let support = provider.support();
    if support.len() != p * q {
        return Err(SeriesError::InvalidArgument(
            "support has the wrong length".into(),
        ));
    }
    let scale = 1.0 / (GammaConstant::new(p as u32).value * GammaConstant::new(q as u32).value);
    let mut acc = DiagonalAccumulator::new(0.0);
    let mut visited = 0u64;
    for degree in 2..=options.degree_cap {
        let mut indices: Vec<Vec<u32>> = Vec::new();
        for_each_composition(&support, degree, &mut |s| {
            visited += 1;
            if visited > options.term_limit {
                return Err(SeriesError::Capacity {
                    limit: options.term_limit,
                });
            }
            if has_even_margins(s, p, q) {
                indices.push(s.to_vec());
            }
            Ok(())
        })?;
        let totals: Vec<(f64, u64)> = indices
            .par_iter()
            .map(|s| match options.enumeration {
                MatrixEnumeration::Grouped => match provider.grouped(s) {
                    Some(v) => {
                        let splits = s.iter().map(|&x| u64::from(x) + 1).product::<u64>() - 2;
                        (v, splits)
                    }
                    None => pairs_total(provider, s),
                },
                MatrixEnumeration::Pairs => pairs_total(provider, s),
            })
            .collect();
        let values: Vec<f64> = totals.iter().map(|t| t.0).collect();
        let count = totals.iter().map(|t| t.1).sum();
        acc.push(u64::from(degree), pairwise_sum(&values), count);
    }
    let tail = acc.tail_estimate();
    let mut ev = acc.finish(false);
    match tail {
        Some(t) => {
            ev.tail_bound = t;
            ev.converged = t <= options.abs_tol;
            Ok(ev.scaled(scale))
        }
        None => Err(SeriesError::NonConvergence {
            partial: ev.scaled(scale),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compositions_are_lexicographic_and_complete() {
        let mut seen = Vec::new();
        for_each_composition(&[true, false, true], 2, &mut |s| {
            seen.push(s.to_vec());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![vec![0, 0, 2], vec![1, 0, 1], vec![2, 0, 0]]);
    }

    #[test]
    fn margin_parity() {
        assert!(has_even_margins(&[2, 0, 0, 2], 2, 2));
        assert!(has_even_margins(&[1, 1, 1, 1], 2, 2));
        assert!(!has_even_margins(&[1, 1, 0, 0], 2, 2));
    }
}
