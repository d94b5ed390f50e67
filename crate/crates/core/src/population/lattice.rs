//! Periodic trapezoid sums shared by the lattice families.

use std::f64::consts::PI;

/// Relative agreement required between two successive grid sizes.
pub const PERIODIC_REL_TOL: f64 = 1e-13;
const MAX_NODES: usize = 1 << 20;

fn trapezoid(n: usize, len: usize, f: &impl Fn(f64, &mut [f64])) -> Vec<f64> {
    let h = 2.0 * PI / n as f64;
    let mut acc = vec![0.0; len];
    let mut buf = vec![0.0; len];
    for i in 0..n {
        f(h * (i as f64 + 0.5), &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b;
        }
    }
    acc.iter_mut().for_each(|a| *a *= h);
    acc
}

/// Offset trapezoid rule over one period for `len` periodic integrands at
/// once; `f(s, out)` fills the integrand values at `s`.  The grid doubles
/// from `n0` until successive results agree.
pub fn adaptive_periodic(n0: usize, len: usize, f: impl Fn(f64, &mut [f64])) -> Vec<f64> {
    let mut n = n0.max(8);
    let mut prev = trapezoid(n, len, &f);
    loop {
        n *= 2;
        let next = trapezoid(n, len, &f);
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = next
            .iter()
            .zip(&prev)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if diff <= PERIODIC_REL_TOL * scale || n >= MAX_NODES {
            return next;
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_integral() {
        // ∫_0^{2π} e^{x cos s} ds = 2π I_0(x); I_0(1) from mpmath
        let v = adaptive_periodic(8, 1, |s, out| out[0] = s.cos().exp());
        assert!((v[0] - 2.0 * PI * 1.266_065_877_752_008_4).abs() < 1e-13);
    }
}
