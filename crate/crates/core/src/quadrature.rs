//! One-dimensional quadrature rules.

use std::f64::consts::PI;

use crate::specfun::ln_gamma;

/// Nodes and weights of a rule; weights may carry a common log scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule to `f`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Affine map of a rule on `[-1, 1]` onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Rule {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        Rule {
            nodes: self.nodes.iter().map(|x| c + h * x).collect(),
            weights: self.weights.iter().map(|w| w * h).collect(),
        }
    }
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Jacobi rule for the weight `y^a (1-y)^b` on `[0, 1]`.
///
/// Weights are returned without the total mass `B(a+1, b+1)`, whose log is
/// returned separately so that very concentrated weights stay representable.
pub fn gauss_jacobi_unit(n: usize, a: f64, b: f64) -> (Rule, f64) {
    assert!(n >= 1 && a > -1.0 && b > -1.0);
    // Jacobi matrix on [-1,1] for (1-x)^al (1+x)^be with al = b, be = a
    let (al, be) = (b, a);
    let s = al + be;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for k in 0..n {
        let kf = k as f64;
        diag[k] = if k == 0 {
            (be - al) / (s + 2.0)
        } else {
            (be * be - al * al) / ((2.0 * kf + s) * (2.0 * kf + s + 2.0))
        };
        if k >= 1 {
            let b2 = if k == 1 {
                4.0 * (1.0 + al) * (1.0 + be) / ((2.0 + s).powi(2) * (3.0 + s))
            } else {
                4.0 * kf * (kf + al) * (kf + be) * (kf + s)
                    / ((2.0 * kf + s).powi(2) * (2.0 * kf + s + 1.0) * (2.0 * kf + s - 1.0))
            };
            off[k] = b2.sqrt();
        }
    }
    let (values, first) = symmetric_tridiagonal_eigen(diag, off);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let nodes = idx.iter().map(|&i| 0.5 * (1.0 + values[i])).collect();
    let weights = idx.iter().map(|&i| first[i] * first[i]).collect();
    let ln_mass =
        ln_gamma(a + 1.0).unwrap() + ln_gamma(b + 1.0).unwrap() - ln_gamma(a + b + 2.0).unwrap();
    (Rule { nodes, weights }, ln_mass)
}

/// Implicit QL on a symmetric tridiagonal matrix, tracking only the first
/// component of each eigenvector (enough for Golub–Welsch weights).
fn symmetric_tridiagonal_eigen(mut d: Vec<f64>, sub: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..(n - 1)].copy_from_slice(&sub[1..n]);
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 200, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    (d, z)
}

/// Tanh-sinh rule on `[-1, 1]` with step `h` and `levels` nodes per side.
pub fn tanh_sinh(h: f64, levels: usize) -> Rule {
    let mut nodes = Vec::with_capacity(2 * levels + 1);
    let mut weights = Vec::with_capacity(2 * levels + 1);
    for k in -(levels as i64)..=(levels as i64) {
        let t = k as f64 * h;
        let u = 0.5 * PI * t.sinh();
        let x = u.tanh();
        let w = h * 0.5 * PI * t.cosh() / u.cosh().powi(2);
        if w > 0.0 && x.abs() < 1.0 {
            nodes.push(x);
            weights.push(w);
        }
    }
    Rule { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let r = gauss_legendre(16);
        let v = r.integrate(|x| x.powi(30) + x.powi(7));
        assert!((v - 2.0 / 31.0).abs() < 1e-15);
        let r = gauss_legendre(7).mapped(0.0, 2.0);
        assert!((r.integrate(|x| x.exp()) - (2f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn jacobi_moments() {
        // ∫ y^a (1-y)^b y^k dy / B(a+1, b+1) = (a+1)_k / (a+b+2)_k
        let (a, b) = (-0.4, 37.5);
        let (rule, ln_mass) = gauss_jacobi_unit(12, a, b);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        for k in 0..20 {
            let got = rule.integrate(|y| y.powi(k));
            let mut want = 1.0;
            for i in 0..k {
                want *= (a + 1.0 + i as f64) / (a + b + 2.0 + i as f64);
            }
            assert!((got - want).abs() < 1e-13 * want, "k={k}");
        }
        let direct = ln_gamma(0.6).unwrap() + ln_gamma(38.5).unwrap() - ln_gamma(39.1).unwrap();
        assert!((ln_mass - direct).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        let r = tanh_sinh(1.0 / 16.0, 80);
        let v = r.integrate(|x| (1.0 + x).ln());
        assert!((v - (2.0 * 2f64.ln() - 2.0)).abs() < 1e-12);
    }
}
