//! Small numerical building blocks shared by the physics modules.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Smallest power of two that is at least `n`.
pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Bessel function `J_n(x)` of integer order from the trapezoid rule applied
/// to `(1/2π)∫ cos(nθ − x sin θ) dθ`, which converges geometrically once the
/// node count exceeds `|x| + |n|`.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let nodes = next_pow2((x.abs() + n.unsigned_abs() as f64) as usize * 2 + 64);
    let h = 2.0 * PI / nodes as f64;
    let s: f64 = (0..nodes)
        .map(|j| {
            let th = j as f64 * h;
            (n as f64 * th - x * th.sin()).cos()
        })
        .sum();
    s / nodes as f64
}

/// One-dimensional lattice propagator `q_R(x) = ∫_0^{2π} dp/2π e^{ipx + iR cos p}`
/// on a periodic grid of `n` points, returned for `x = 0,…,n−1` with
/// wrap-around for negative `x`.  The grid size is raised as needed so that
/// aliasing is below double-precision resolution.
pub fn propagator_1d(r: f64, n_min: usize) -> Vec<Complex64> {
    let n = next_pow2(n_min.max(2 * r.abs().ceil() as usize + 64));
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, r * (2.0 * PI * j as f64 / n as f64).cos()))
        .collect();
    let plan = FftPlanner::new().plan_fft_inverse(n);
    plan.process(&mut buf);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= s);
    buf
}

/// Looks up `q(x)` in a wrapped table produced by [`propagator_1d`].
pub fn wrapped(table: &[Complex64], x: i64) -> Complex64 {
    let n = table.len() as i64;
    if x.abs() >= n / 2 {
        return Complex64::new(0.0, 0.0);
    }
    table[x.rem_euclid(n) as usize]
}

/// Result of a straight-line least-squares fit `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    /// Weighted residual sum of squares.
    pub chi2: f64,
}

/// Weighted least squares line fit; `sigma` holds the per-point standard
/// deviations or is `None` for unit weights.  When unit weights are used the
/// parameter errors are scaled by the residual variance.
pub fn fit_line(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let w: Vec<f64> = match sigma {
        Some(s) => s.iter().map(|v| 1.0 / (v * v)).collect(),
        None => vec![1.0; n],
    };
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return None;
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2: f64 = (0..n).map(|i| w[i] * (y[i] - slope * x[i] - intercept).powi(2)).sum();
    let scale = if sigma.is_none() && n > 2 { chi2 / (n - 2) as f64 } else { 1.0 };
    Some(LineFit {
        slope,
        intercept,
        slope_err: (scale * sw / det).sqrt(),
        intercept_err: (scale * sxx / det).sqrt(),
        chi2,
    })
}

/// Value at `x = 0` of the interpolating polynomial through `(xs, ys)`,
/// computed with Neville's scheme.
pub fn neville_at_zero<T>(xs: &[f64], ys: &[T]) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Sub<Output = T> + std::ops::Add<Output = T>,
{
    assert!(!xs.is_empty() && xs.len() == ys.len());
    let mut p: Vec<T> = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            // p_i <- (x_j p_i - x_i p_{i+1}) / (x_j - x_i) evaluated at 0
            let inv = 1.0 / (xj - xi);
            p[i] = p[i] * (xj * inv) - p[i + 1] * (xi * inv);
        }
    }
    p[0]
}

/// Extrapolated value to zero together with an error estimate, taken as the
/// difference from the extrapolation that drops the coarsest point.
pub fn extrapolate_to_zero<T>(xs: &[f64], ys: &[T]) -> (T, T)
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Sub<Output = T> + std::ops::Add<Output = T>,
{
    let full = neville_at_zero(xs, ys);
    if xs.len() < 2 {
        return (full, full - full);
    }
    let partial = neville_at_zero(&xs[1..], &ys[1..]);
    (full, full - partial)
}

/// Kahan-compensated sum of a sequence of complex numbers.
pub fn compensated_sum<I: IntoIterator<Item = Complex64>>(iter: I) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    for v in iter {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Adaptive Simpson quadrature of a complex integrand on `[a, b]`.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (fa + 4.0 * fm + fb) * ((b - a) / 6.0);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (fa + 4.0 * flm + fm) * ((m - a) / 6.0);
    let right = (fm + 4.0 * frm + fb) * ((b - m) / 6.0);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
