//! Time-simplex integrals
//! `S(γ; t) = ∫_{ℝ₊^{n+1}} ds δ(t − Σ s_i) Π e^{−iγ_i s_i}`
//! and numerical checks of the interlacing and resolvent identities.

use num_complex::Complex64;

use super::enumerate::enumerate_interlacings;
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest `n + n′` accepted by the interlacing check.
pub const MAX_INTERLACING_ORDER: usize = 6;
/// Largest index set accepted by the resolvent check.
pub const MAX_RESOLVENT_SET: usize = 4;
/// Smallest contour margin around the phases.
pub const MIN_CONTOUR_MARGIN: f64 = 1e-3;
/// Smallest number of contour nodes.
pub const MIN_CONTOUR_NODES: usize = 2000;

const MAX_DOUBLINGS: usize = 20;

/// One RK4 step of `y₀′ = −iγ₀ y₀`, `y_j′ = −iγ_j y_j + y_{j−1}`.
fn rk4_step(g: &[Complex64], y: &mut [Complex64], h: f64, k: &mut [[Complex64; 4]]) {
    let n = g.len();
    let rhs = |y: &[Complex64], j: usize| -> Complex64 {
        let mut d = -I * g[j] * y[j];
        if j > 0 {
            d += y[j - 1];
        }
        d
    };
    let mut tmp = y.to_vec();
    for j in 0..n {
        k[j][0] = rhs(y, j);
    }
    for j in 0..n {
        tmp[j] = y[j] + 0.5 * h * k[j][0];
    }
    for j in 0..n {
        k[j][1] = rhs(&tmp, j);
    }
    for j in 0..n {
        tmp[j] = y[j] + 0.5 * h * k[j][1];
    }
    for j in 0..n {
        k[j][2] = rhs(&tmp, j);
    }
    for j in 0..n {
        tmp[j] = y[j] + h * k[j][2];
    }
    for j in 0..n {
        k[j][3] = rhs(&tmp, j);
    }
    for j in 0..n {
        y[j] += h / 6.0 * (k[j][0] + 2.0 * k[j][1] + 2.0 * k[j][2] + k[j][3]);
    }
}

fn integrate_fixed(g: &[Complex64], t: f64, steps: usize) -> Complex64 {
    let mut y = vec![Complex64::new(0.0, 0.0); g.len()];
    y[0] = Complex64::new(1.0, 0.0);
    let mut k = vec![[Complex64::new(0.0, 0.0); 4]; g.len()];
    let h = t / steps as f64;
    for _ in 0..steps {
        rk4_step(g, &mut y, h, &mut k);
    }
    y[g.len() - 1]
}

/// `S(γ; t)` from the linear system satisfied by the partial simplex
/// integrals `y_j(t) = S(γ₀, …, γ_j; t)`, solved by RK4 with step doubling
/// until two successive results differ by less than `tol` (relative to
/// `max(1, |S|)`), followed by a Richardson correction.
pub fn simplex_integral(gammas: &[Complex64], t: f64, tol: f64) -> Result<Complex64> {
    if gammas.is_empty() {
        return Err(Error::InvalidInput("simplex integral needs at least one phase".into()));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("time {t} must be finite and non-negative")));
    }
    if t == 0.0 {
        return Ok(if gammas.len() == 1 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    }
    let scale = gammas.iter().map(|g| g.norm()).fold(1.0, f64::max) * t;
    let mut steps = ((4.0 * scale).ceil() as usize).max(16);
    let mut prev = integrate_fixed(gammas, t, steps);
    for _ in 0..MAX_DOUBLINGS {
        steps *= 2;
        let cur = integrate_fixed(gammas, t, steps);
        let diff = (cur - prev).norm();
        if diff < tol * cur.norm().max(1.0) {
            return Ok(cur + (cur - prev) / 15.0);
        }
        prev = cur;
    }
    Err(Error::NonConvergence(format!("simplex integral did not reach tolerance {tol}")))
}

/// Closed form `Σ_j e^{−iγ_j t} Π_{k≠j} 1/(iγ_k − iγ_j)` for pairwise
/// distinct phases.
pub fn simplex_integral_distinct(gammas: &[Complex64], t: f64) -> Complex64 {
    gammas
        .iter()
        .enumerate()
        .map(|(j, gj)| {
            let den: Complex64 =
                gammas.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, gk)| I * (gk - gj)).product();
            (-I * gj * t).exp() / den
        })
        .sum()
}

/// Phases at least this far apart use the closed form inside the contour
/// integrand, where its cancellation error stays far below the quadrature
/// error.
const CLOSED_FORM_SEPARATION: f64 = 0.05;

fn min_separation(gammas: &[Complex64]) -> f64 {
    let mut m = f64::INFINITY;
    for (i, a) in gammas.iter().enumerate() {
        for b in &gammas[i + 1..] {
            m = m.min((a - b).norm());
        }
    }
    m
}

fn check_lower_half_plane(gammas: &[Complex64]) -> Result<()> {
    if let Some(g) = gammas.iter().find(|g| g.im > 0.0 || !g.re.is_finite() || !g.im.is_finite()) {
        return Err(Error::InvalidInput(format!("phase {g} must be finite with Im γ ≤ 0")));
    }
    Ok(())
}

/// Both sides of the interlacing identity: the product of the simplex
/// integrals of `γ⁺` and `γ⁻`, and the sum over interlacings `J` of the
/// simplex integral with phases `γ⁺_{J₊(i)} + γ⁻_{J₋(i)}`.
pub fn interlacing_sides(gp: &[Complex64], gm: &[Complex64], t: f64, tol: f64) -> Result<(Complex64, Complex64)> {
    check_lower_half_plane(gp)?;
    check_lower_half_plane(gm)?;
    if gp.is_empty() || gm.is_empty() {
        return Err(Error::InvalidInput("both phase lists need at least one entry".into()));
    }
    let (n, nm) = (gp.len() - 1, gm.len() - 1);
    if n + nm > MAX_INTERLACING_ORDER {
        return Err(Error::Guard(format!("n + n′ = {} exceeds {MAX_INTERLACING_ORDER}", n + nm)));
    }
    let lhs = simplex_integral(gp, t, tol)? * simplex_integral(gm, t, tol)?;
    let mut rhs = Complex64::new(0.0, 0.0);
    for j in enumerate_interlacings(n, nm)? {
        let phases: Vec<Complex64> =
            (0..=n + nm).map(|i| gp[j.prefix(1, i)] + gm[j.prefix(-1, i)]).collect();
        rhs += simplex_integral(&phases, t, tol)?;
    }
    Ok((lhs, rhs))
}

/// `|LHS − RHS|` of the interlacing identity.
pub fn verify_interlacing_identity(gp: &[Complex64], gm: &[Complex64], t: f64) -> Result<f64> {
    let (l, r) = interlacing_sides(gp, gm, t, 1e-12)?;
    Ok((l - r).norm())
}

/// Rectangular integration contour around the phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourConfig {
    /// Distance between the bounding box of the phases and the contour.
    pub margin: f64,
    /// Trapezoid nodes on the finer of the two contour discretizations.
    pub nodes: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self { margin: 1.0, nodes: 4000 }
    }
}

/// Trapezoid rule for `∮ f(z) dz` on the rectangle `[x0, x1] × [y0, y1]`
/// traversed anticlockwise with `n` nodes spread by side length.
fn rectangle_trapezoid<F: Fn(Complex64) -> Result<Complex64>>(
    corners: (f64, f64, f64, f64),
    n: usize,
    f: &F,
) -> Result<Complex64> {
    let (x0, x1, y0, y1) = corners;
    let verts = [
        Complex64::new(x0, y0),
        Complex64::new(x1, y0),
        Complex64::new(x1, y1),
        Complex64::new(x0, y1),
    ];
    let lens = [x1 - x0, y1 - y0, x1 - x0, y1 - y0];
    let perim: f64 = lens.iter().sum();
    let mut total = Complex64::new(0.0, 0.0);
    for s in 0..4 {
        let a = verts[s];
        let b = verts[(s + 1) % 4];
        let m = ((n as f64 * lens[s] / perim).round() as usize).max(2);
        let h = (b - a) / m as f64;
        let mut side = 0.5 * (f(a)? + f(b)?);
        for i in 1..m {
            side += f(a + h * i as f64)?;
        }
        total += side * h;
    }
    Ok(total)
}

/// Both sides of the resolvent identity for phases `γ_i`, `i ∈ I`, and the
/// subset `A ⊂ I` given by indices into `gammas`.  The contour integral is
/// evaluated with the trapezoid rule at `nodes` and `nodes/2` points and
/// Richardson-extrapolated.
pub fn resolvent_sides(gammas: &[Complex64], a: &[usize], t: f64, contour: ContourConfig) -> Result<(Complex64, Complex64)> {
    check_lower_half_plane(gammas)?;
    if gammas.is_empty() || gammas.len() > MAX_RESOLVENT_SET {
        return Err(Error::Guard(format!("index set size {} outside 1..={MAX_RESOLVENT_SET}", gammas.len())));
    }
    if a.is_empty() || a.iter().any(|&i| i >= gammas.len()) {
        return Err(Error::InvalidInput("A must be a non-empty subset of the index set".into()));
    }
    let mut sorted = a.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != a.len() {
        return Err(Error::InvalidInput("A has repeated indices".into()));
    }
    if contour.margin < MIN_CONTOUR_MARGIN {
        return Err(Error::InvalidInput(format!(
            "contour margin {} is closer than {MIN_CONTOUR_MARGIN} to a pole",
            contour.margin
        )));
    }
    if contour.nodes < MIN_CONTOUR_NODES {
        return Err(Error::InvalidInput(format!("contour needs at least {MIN_CONTOUR_NODES} nodes")));
    }
    let tol = 1e-12;
    let lhs = simplex_integral(gammas, t, tol)?;
    let rest: Vec<Complex64> =
        (0..gammas.len()).filter(|i| !sorted.contains(i)).map(|i| gammas[i]).collect();
    let poles: Vec<Complex64> = sorted.iter().map(|&i| gammas[i]).collect();
    let integrand = |z: Complex64| -> Result<Complex64> {
        let mut phases = rest.clone();
        phases.push(z);
        let s = if phases.len() == 1 {
            (-I * z * t).exp()
        } else if min_separation(&phases) >= CLOSED_FORM_SEPARATION {
            simplex_integral_distinct(&phases, t)
        } else {
            simplex_integral(&phases, t, tol)?
        };
        Ok(poles.iter().fold(s, |acc, g| acc * I / (z - g)))
    };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for g in gammas {
        x0 = x0.min(g.re);
        x1 = x1.max(g.re);
        y0 = y0.min(g.im);
        y1 = y1.max(g.im);
    }
    let corners = (x0 - contour.margin, x1 + contour.margin, y0 - contour.margin, y1 + contour.margin);
    let fine = rectangle_trapezoid(corners, contour.nodes, &integrand)?;
    let coarse = rectangle_trapezoid(corners, contour.nodes / 2, &integrand)?;
    let integral = fine + (fine - coarse) / 3.0;
    let rhs = -integral / (2.0 * std::f64::consts::PI);
    Ok((lhs, rhs))
}

/// `|LHS − RHS|` of the resolvent identity.
pub fn verify_resolvent_identity(gammas: &[Complex64], a: &[usize], t: f64, contour: ContourConfig) -> Result<f64> {
    let (l, r) = resolvent_sides(gammas, a, t, contour)?;
    Ok((l - r).norm())
}
