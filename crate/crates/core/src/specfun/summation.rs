//! Error-free transformations and compensated accumulators.

/// `a + b = s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// `a * b = p + e` exactly (relies on a fused multiply-add).
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Neumaier-compensated running sum that also tracks `sum |x_i|`.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
    abs_sum: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.sum, x);
        self.sum = s;
        self.comp += e;
        self.abs_sum += x.abs();
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn abs_sum(&self) -> f64 {
        self.abs_sum
    }

    /// `sum |x_i| / |sum x_i|`; infinite when the sum cancels to zero.
    pub fn condition(&self) -> f64 {
        let v = self.value().abs();
        if self.abs_sum == 0.0 {
            1.0
        } else if v == 0.0 {
            f64::INFINITY
        } else {
            self.abs_sum / v
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<CompensatedSum>().value()
}

/// Sum by a fixed balanced binary tree; the result depends only on the
/// order of `xs`, never on how work was split across threads.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => compensated_sum(xs),
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}
