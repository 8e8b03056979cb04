//! One-dimensional quadrature and monotone interpolation.

use crate::error::{ImcfError, Result};

/// Composite Simpson rule on `[a, b]` with `intervals` (rounded up to even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = (intervals.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Running integral of equally spaced samples `ys` with spacing `h`.
///
/// Even nodes use composite Simpson; odd nodes add the three-point partial
/// panel `h/12 (5 y0 + 8 y1 - y2)`, so every entry is third-order accurate.
pub fn cumulative_simpson(ys: &[f64], h: f64) -> Vec<f64> {
    let n = ys.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (ys[0] + ys[1]);
        return out;
    }
    let mut k = 0;
    while k + 2 < n {
        out[k + 1] = out[k] + h / 12.0 * (5.0 * ys[k] + 8.0 * ys[k + 1] - ys[k + 2]);
        out[k + 2] = out[k] + h / 3.0 * (ys[k] + 4.0 * ys[k + 1] + ys[k + 2]);
        k += 2;
    }
    if k + 1 < n {
        // trailing odd panel, integrated backwards from the last three samples
        out[k + 1] = out[k] + h / 12.0 * (-ys[k - 1] + 8.0 * ys[k] + 5.0 * ys[k + 1]);
    }
    out
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Integral over `[a, inf)` summed over doubling panels until the tail is negligible.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut lo = a;
    let mut width = 1.0;
    for _ in 0..64 {
        let hi = lo + width;
        let part = adaptive_simpson(f, lo, hi, tol * 1e-2);
        total += part;
        if part.abs() <= tol && width >= 8.0 {
            return Ok(total);
        }
        lo = hi;
        width *= 2.0;
    }
    Err(ImcfError::Unbounded(format!(
        "integral from {a} does not converge (partial sum {total:e})"
    )))
}

/// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// `xs` must be strictly increasing.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(ImcfError::Range("need at least two aligned samples".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ImcfError::Range("abscissae not strictly increasing".into()));
        }
        let secants: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for k in 1..n - 1 {
            let (d0, d1) = (secants[k - 1], secants[k]);
            if d0 * d1 <= 0.0 {
                slopes[k] = 0.0;
            } else {
                // weighted harmonic mean keeps the interpolant monotone
                let h0 = xs[k] - xs[k - 1];
                let h1 = xs[k + 1] - xs[k];
                let w0 = 2.0 * h1 + h0;
                let w1 = h1 + 2.0 * h0;
                slopes[k] = (w0 + w1) / (w0 / d0 + w1 / d1);
            }
        }
        Ok(MonotoneCubic { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Evaluates the interpolant; arguments outside the domain are clamped.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.xs.partition_point(|&v| v <= x) - 1;
        let h = self.xs[k + 1] - self.xs[k];
        let s = (x - self.xs[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.ys[k] + h * h10 * self.slopes[k] + h01 * self.ys[k + 1] + h * h11 * self.slopes[k + 1]
    }
}
