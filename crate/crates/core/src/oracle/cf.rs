//! Characteristic-function builders for the supported families.
//!
//! Each builder also supplies `ψ_{XY} - ψ_X ψ_Y` in a form that does not
//! cancel near the coordinate axes, where the oracle integrand is a ratio of
//! two vanishing quantities.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::{CharacteristicTriple, OracleError};

pub type Cf1 = Arc<dyn Fn(f64) -> C64 + Send + Sync>;
pub type Cf2 = Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>;

/// `e^z - 1` without cancellation for small `|z|`.
pub fn cexpm1(z: C64) -> C64 {
    let (s, c) = z.im.sin_cos();
    let em1 = z.re.exp_m1();
    let h = (0.5 * z.im).sin();
    C64::new(em1 * c - 2.0 * h * h, (em1 + 1.0) * s)
}

/// Principal `ln(1 + w)` without cancellation for small `|w|`.
pub fn clog1p(w: C64) -> C64 {
    let (x, y) = (w.re, w.im);
    C64::new(0.5 * (2.0 * x + x * x + y * y).ln_1p(), y.atan2(1.0 + x))
}

/// `ln(1 + w)` on the branch that matches a directly computed difference of
/// logarithms `direct` (which may be off by cancellation but not by more
/// than `π` in its imaginary part).  Away from `w = 0` the direct
/// difference is the more accurate of the two.
fn log1p_on_branch(w: C64, direct: C64) -> C64 {
    if w.norm() > 0.5 {
        return direct;
    }
    let c = clog1p(w);
    let k = ((direct.im - c.im) / (2.0 * PI)).round();
    C64::new(c.re, c.im + 2.0 * PI * k)
}

/// `e^{-q} (e^x - 1)`, accurate for small `x` and free of `0·∞` for large `|x|`.
pub fn gauss_expm1(q: f64, x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-q).exp() * x.exp_m1()
    } else {
        (x - q).exp() - (-q).exp()
    }
}

fn i_unit(x: f64) -> C64 {
    C64::new(0.0, x)
}

fn gaussian_tail(rho: f64) -> Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
    // |Δ|²/(s²t²) ≤ ρ² e^{-(1-|ρ|)(s²+t²)} integrated over max(s,t) > S
    let kappa = 1.0 - rho.abs();
    (kappa > 0.0).then(|| {
        Arc::new(move |cut: f64| 2.0 * rho * rho * libm::erfc(kappa.sqrt() * cut) / (PI * kappa))
            as Arc<dyn Fn(f64) -> f64 + Send + Sync>
    })
}

fn check(ok: bool, what: &str) -> Result<(), OracleError> {
    if ok {
        Ok(())
    } else {
        Err(OracleError::InvalidParameter(what.to_string()))
    }
}

/// Standard bivariate normal with correlation `ρ ∈ [-1, 1]`.
pub fn cf_bvn(rho: f64) -> Result<CharacteristicTriple, OracleError> {
    check(rho.abs() <= 1.0, "|rho| <= 1")?;
    let m: Cf1 = Arc::new(|s| C64::new((-0.5 * s * s).exp(), 0.0));
    Ok(CharacteristicTriple {
        joint: Arc::new(move |s, t| C64::new((-0.5 * (s * s + t * t) - rho * s * t).exp(), 0.0)),
        marginal_x: m.clone(),
        marginal_y: m,
        difference: Arc::new(move |s, t| {
            C64::new(gauss_expm1(0.5 * (s * s + t * t), -rho * s * t), 0.0)
        }),
        lattice: false,
        analytic_tail: gaussian_tail(rho),
        truncation_mass: 0.0,
    })
}

/// Equal mixture of standard bivariate normals with correlations `±ρ`.
pub fn cf_mixture_bvn(rho: f64) -> Result<CharacteristicTriple, OracleError> {
    check(rho.abs() <= 1.0, "|rho| <= 1")?;
    let m: Cf1 = Arc::new(|s| C64::new((-0.5 * s * s).exp(), 0.0));
    Ok(CharacteristicTriple {
        joint: Arc::new(move |s, t| {
            let (q, x) = (0.5 * (s * s + t * t), rho * s * t);
            C64::new(0.5 * ((x - q).exp() + (-x - q).exp()), 0.0)
        }),
        marginal_x: m.clone(),
        marginal_y: m,
        difference: Arc::new(move |s, t| {
            // cosh x - 1 = ((e^x - 1) + (e^{-x} - 1))/2
            let (q, x) = (0.5 * (s * s + t * t), rho * s * t);
            C64::new(0.5 * (gauss_expm1(q, x) + gauss_expm1(q, -x)), 0.0)
        }),
        lattice: false,
        analytic_tail: gaussian_tail(rho),
        truncation_mass: 0.0,
    })
}

fn gamma_log_cf(alpha: f64) -> impl Fn(f64) -> C64 + Send + Sync + Copy {
    move |s: f64| -alpha * C64::new(1.0, -s).ln()
}

/// Kibble–Moran bivariate gamma, `ψ = [(1-is)(1-it) + λst]^{-α}`, with
/// `λ ∈ [0, 1]` (`λ = 1` is `X = Y`).
pub fn cf_kibble_gamma(alpha: f64, lambda: f64) -> Result<CharacteristicTriple, OracleError> {
    check(alpha > 0.0 && alpha.is_finite(), "alpha > 0")?;
    check((0.0..=1.0).contains(&lambda), "0 <= lambda <= 1")?;
    let lg = gamma_log_cf(alpha);
    let m: Cf1 = Arc::new(move |s| lg(s).exp());
    Ok(CharacteristicTriple {
        joint: Arc::new(move |s, t| {
            let p = C64::new(1.0, -s) * C64::new(1.0, -t) + lambda * s * t;
            (-alpha * p.ln()).exp()
        }),
        marginal_x: m.clone(),
        marginal_y: m,
        difference: Arc::new(move |s, t| {
            let (a, b) = (C64::new(1.0, -s), C64::new(1.0, -t));
            let l0 = a.ln() + b.ln();
            let p0 = a * b;
            let p1 = p0 + lambda * s * t;
            let log_ratio = log1p_on_branch(lambda * s * t / p0, p1.ln() - l0);
            (-alpha * l0).exp() * cexpm1(-alpha * log_ratio)
        }),
        lattice: false,
        analytic_tail: None,
        truncation_mass: 0.0,
    })
}

/// Sarmanov bivariate gamma with shapes `α ≥ β` and
/// `ρ_n = λ^n √((β)_n/(α)_n)`, summing the Laguerre transforms up to `n_cap`.
pub fn cf_sarmanov_gamma(
    alpha: f64,
    beta: f64,
    lambda: f64,
    n_cap: usize,
) -> Result<CharacteristicTriple, OracleError> {
    check(alpha > 0.0 && alpha.is_finite(), "alpha > 0")?;
    check(beta > 0.0 && beta <= alpha, "0 < beta <= alpha")?;
    check((0.0..1.0).contains(&lambda), "0 <= lambda < 1")?;
    let (la, lb) = (gamma_log_cf(alpha), gamma_log_cf(beta));
    let mx: Cf1 = Arc::new(move |s| la(s).exp());
    let my: Cf1 = Arc::new(move |t| lb(t).exp());
    // 𝒫_n(s) = c_n(α) (1-is)^{-α} (-is/(1-is))^n with c_n(α) = √((α)_n/n!), and
    // a_n c_n(α) c_n(β) = λ^n (β)_n/n!
    let difference: Cf2 = Arc::new(move |s, t| {
        let base = (la(s) + lb(t)).exp();
        let us = C64::new(0.0, -s) / C64::new(1.0, -s);
        let ut = C64::new(0.0, -t) / C64::new(1.0, -t);
        let ratio = us * ut * lambda;
        let bound = ratio.norm();
        let mut w = 1.0;
        let mut pow = C64::new(1.0, 0.0);
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..n_cap {
            w *= (beta + n as f64) / (n as f64 + 1.0);
            pow *= ratio;
            let term = pow * w;
            acc += term;
            if term.norm() < 1e-17 * acc.norm() && (n as f64) > beta * bound / (1.0 - bound) {
                break;
            }
        }
        base * acc
    });
    let d2 = difference.clone();
    let (mx2, my2) = (mx.clone(), my.clone());
    Ok(CharacteristicTriple {
        joint: Arc::new(move |s, t| mx2(s) * my2(t) + d2(s, t)),
        marginal_x: mx,
        marginal_y: my,
        difference,
        lattice: false,
        analytic_tail: None,
        truncation_mass: 0.0,
    })
}

/// Identical gamma margins, `X = Y ~ Gamma(α)`.
pub fn cf_gamma_identical(alpha: f64) -> Result<CharacteristicTriple, OracleError> {
    cf_kibble_gamma(alpha, 1.0)
}

/// Additive bivariate Poisson with mean `a` and `Corr = λ ∈ [0, 1]`.
pub fn cf_bivariate_poisson(a: f64, lambda: f64) -> Result<CharacteristicTriple, OracleError> {
    check(a > 0.0 && a.is_finite(), "a > 0")?;
    check((0.0..=1.0).contains(&lambda), "0 <= lambda <= 1")?;
    let e1 = |s: f64| cexpm1(i_unit(s));
    let m: Cf1 = Arc::new(move |s| (a * e1(s)).exp());
    Ok(CharacteristicTriple {
        joint: Arc::new(move |s, t| {
            (a * (1.0 - lambda) * (e1(s) + e1(t)) + a * lambda * e1(s + t)).exp()
        }),
        marginal_x: m.clone(),
        marginal_y: m,
        difference: Arc::new(move |s, t| {
            let (es, et) = (e1(s), e1(t));
            (a * (es + et)).exp() * cexpm1(a * lambda * es * et)
        }),
        lattice: true,
        analytic_tail: None,
        truncation_mass: 0.0,
    })
}

fn negbin_log_cf(beta: f64, c: f64) -> impl Fn(f64) -> C64 + Send + Sync + Copy {
    move |s: f64| beta * ((1.0 - c).ln() - (C64::new(1.0, 0.0) - c * i_unit(s).exp()).ln())
}

/// Identical negative binomial margins, `X = Y`, `ψ_X(s) = ((1-c)/(1-ce^{is}))^β`.
pub fn cf_negbinomial_identical(beta: f64, c: f64) -> Result<CharacteristicTriple, OracleError> {
    check(beta > 0.0 && beta.is_finite(), "beta > 0")?;
    check(c > 0.0 && c < 1.0, "0 < c < 1")?;
    let lg = negbin_log_cf(beta, c);
    let m: Cf1 = Arc::new(move |s| lg(s).exp());
    Ok(CharacteristicTriple {
        joint: Arc::new(move |s, t| lg(s + t).exp()),
        marginal_x: m.clone(),
        marginal_y: m,
        difference: Arc::new(move |s, t| {
            // ψ(s+t)/(ψ(s)ψ(t)) = [1 + c(e^{is}-1)(e^{it}-1)/((1-ce^{i(s+t)})(1-c))]^β
            let (es, et) = (cexpm1(i_unit(s)), cexpm1(i_unit(t)));
            let den = (C64::new(1.0, 0.0) - c * i_unit(s + t).exp()) * (1.0 - c);
            let direct = (lg(s + t) - lg(s) - lg(t)) / beta;
            let log_ratio = log1p_on_branch(c * es * et / den, direct);
            (lg(s) + lg(t)).exp() * cexpm1(beta * log_ratio)
        }),
        lattice: true,
        analytic_tail: None,
        truncation_mass: 0.0,
    })
}

/// Negative binomial probabilities `φ(x) = (1-c)^β c^x (β)_x/x!` up to the
/// first `x` where the upper tail drops below `tail`.
pub fn negbin_pmf(beta: f64, c: f64, tail: f64) -> Vec<f64> {
    let mut p = vec![(beta * (1.0 - c).ln()).exp()];
    let mut cum = p[0];
    while 1.0 - cum > tail && p.len() < 1_000_000 {
        let x = (p.len() - 1) as f64;
        let next = p[p.len() - 1] * c * (beta + x) / (x + 1.0);
        if next == 0.0 {
            break;
        }
        cum += next;
        p.push(next);
    }
    p
}

/// Orthonormal Meixner polynomials `M̃_n(x)` for `n = 0..=n_max`, one row per
/// `x` in `0..len`.
pub fn meixner_orthonormal(beta: f64, c: f64, len: usize, n_max: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|xi| {
            let x = xi as f64;
            let mut out = Vec::with_capacity(n_max + 1);
            out.push(1.0);
            if n_max == 0 {
                return out;
            }
            // ν_n = √(c^n (β)_n / n!), r_n = ν_n/ν_{n-1}
            let r = |n: usize| (c * (beta + n as f64 - 1.0) / n as f64).sqrt();
            out.push(r(1) * (1.0 + (c - 1.0) * x / (c * beta)));
            for n in 1..n_max {
                let nf = n as f64;
                // c(n+β) M_{n+1} = [(c-1)x + n + (n+β)c] M_n - n M_{n-1}
                let mid = (c - 1.0) * x + nf + (nf + beta) * c;
                let next = r(n + 1) * (mid * out[n] - nf * r(n) * out[n - 1]) / (c * (nf + beta));
                out.push(next);
            }
            out
        })
        .collect()
}

/// Bivariate negative binomial with Meixner Lancaster coefficients `λ^n`,
/// `λ ∈ [0, 1)`, built from the pmf truncated where the marginal upper tail
/// falls below `tail` (for instance `1e-12`).
pub fn cf_negbinomial(
    beta: f64,
    c: f64,
    lambda: f64,
    tail: f64,
) -> Result<CharacteristicTriple, OracleError> {
    check(beta > 0.0 && beta.is_finite(), "beta > 0")?;
    check(c > 0.0 && c < 1.0, "0 < c < 1")?;
    check((0.0..1.0).contains(&lambda), "0 <= lambda < 1")?;
    check(tail > 0.0 && tail < 1e-3, "0 < tail < 1e-3")?;
    let phi = negbin_pmf(beta, c, tail);
    let len = phi.len();
    let n_max = if lambda == 0.0 {
        0
    } else {
        ((1e-18f64.ln() / lambda.ln()).ceil() as usize).clamp(1, 20_000)
    };
    let m = meixner_orthonormal(beta, c, len, n_max);
    let mut delta = vec![0.0; len * len];
    for x in 0..len {
        for y in 0..len {
            let mut acc = 0.0;
            let mut pow = 1.0;
            for n in 1..=n_max {
                pow *= lambda;
                acc += pow * m[x][n] * m[y][n];
            }
            delta[x * len + y] = phi[x] * phi[y] * acc;
        }
    }
    let mass = 1.0 - phi.iter().sum::<f64>();
    let phi = Arc::new(phi);
    let delta = Arc::new(delta);
    let pm = phi.clone();
    let marginal: Cf1 = Arc::new(move |s| {
        pm.iter()
            .enumerate()
            .map(|(x, &p)| p * i_unit(s * x as f64).exp())
            .sum()
    });
    let dd = delta.clone();
    let difference: Cf2 = Arc::new(move |s, t| {
        let ey: Vec<C64> = (0..len).map(|y| cexpm1(i_unit(t * y as f64))).collect();
        let mut acc = C64::new(0.0, 0.0);
        for x in 1..len {
            let row = &dd[x * len..(x + 1) * len];
            let inner: C64 = row.iter().zip(&ey).skip(1).map(|(&d, &e)| d * e).sum();
            acc += cexpm1(i_unit(s * x as f64)) * inner;
        }
        acc
    });
    let (mx, d2) = (marginal.clone(), difference.clone());
    Ok(CharacteristicTriple {
        joint: Arc::new(move |s, t| mx(s) * mx(t) + d2(s, t)),
        marginal_x: marginal.clone(),
        marginal_y: marginal,
        difference,
        lattice: true,
        analytic_tail: None,
        truncation_mass: 2.0 * mass.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> impl Iterator<Item = (f64, f64)> {
        (0..=20)
            .flat_map(|i| (0..=20).map(move |j| (-20.0 + 2.0 * i as f64, -20.0 + 2.0 * j as f64)))
    }

    #[test]
    fn complex_helpers() {
        let z = C64::new(1e-9, -2e-9);
        assert!((cexpm1(z) - z).norm() < 1e-17);
        assert!((clog1p(z) - z).norm() < 1e-17);
        let w = C64::new(0.7, 1.3);
        assert!((cexpm1(w) - (w.exp() - 1.0)).norm() < 1e-15);
        assert!((clog1p(w) - (w + 1.0).ln()).norm() < 1e-15);
    }

    #[test]
    fn difference_matches_definition() {
        let triples = [
            cf_bvn(0.6).unwrap(),
            cf_mixture_bvn(0.6).unwrap(),
            cf_kibble_gamma(1.5, 0.4).unwrap(),
            cf_kibble_gamma(0.3, 1.0).unwrap(),
            cf_bivariate_poisson(1.0, 0.5).unwrap(),
            cf_negbinomial_identical(1.0, 0.3).unwrap(),
        ];
        for tr in &triples {
            for (s, t) in grid() {
                let direct = tr.joint(s, t) - tr.marginal_x(s) * tr.marginal_y(t);
                assert!(
                    (direct - tr.difference(s, t)).norm() < 1e-13,
                    "{tr:?} {s} {t}: {direct} vs {}",
                    tr.difference(s, t)
                );
            }
        }
    }

    #[test]
    fn sarmanov_equal_shapes_is_kibble() {
        let k = cf_kibble_gamma(2.0, 0.5).unwrap();
        let s = cf_sarmanov_gamma(2.0, 2.0, 0.5, 5000).unwrap();
        for (a, b) in grid() {
            assert!(
                (k.difference(a, b) - s.difference(a, b)).norm() < 1e-12,
                "{a} {b}"
            );
        }
    }

    #[test]
    fn meixner_orthonormality() {
        let (beta, c) = (1.7, 0.4);
        let phi = negbin_pmf(beta, c, 1e-16);
        let m = meixner_orthonormal(beta, c, phi.len(), 8);
        for a in 0..=8 {
            for b in 0..=8 {
                let ip: f64 = (0..phi.len()).map(|x| phi[x] * m[x][a] * m[x][b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-10, "{a} {b}: {ip}");
            }
        }
    }

    #[test]
    fn negbin_margins_and_joint() {
        let (beta, c) = (1.0, 0.3);
        let tr = cf_negbinomial(beta, c, 0.4, 1e-12).unwrap();
        let closed = cf_negbinomial_identical(beta, c).unwrap();
        for (s, t) in grid() {
            assert!((tr.marginal_x(s) - closed.marginal_x(s)).norm() < 1e-9);
            assert!((tr.joint(s, 0.0) - tr.marginal_x(s)).norm() < 1e-10);
            assert!((tr.joint(0.0, t) - tr.marginal_y(t)).norm() < 1e-10);
        }
        assert!((tr.joint(0.0, 0.0).re - 1.0).abs() < 1e-10);
    }
}
