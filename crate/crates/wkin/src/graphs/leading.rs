//! Amplitudes of leading main-term graphs in the kinetic limit and their
//! sum, evaluated on the kinetics grid.
//!
//! A leading graph with `m` motives contributes
//! `(−t)^m/m! · Π_j σ(𝓔₊(v_j)) · P_g(k)`, where `P_g(k)` integrates the
//! pairing covariances `W` over the free loop momenta and every short-slice
//! phase `e^{−is Re γ}` over `s ∈ ℝ₊`.  The loops are peeled bottom-up: at a
//! degree-two vertex with free momenta `f₁, f₂` and parent momentum `q`,
//! every factor depending on the loop is a function of `f₁ + c q`,
//! `f₂ + c q` or `f₁ ± f₂ + c q`, so the loop integral is a triple
//! convolution evaluated with three inverse FFTs and one forward FFT.  The
//! time integral uses the kinetics quadrature with `e^{−εs}` damping for
//! every `ε` of the ladder, followed by extrapolation `ε → 0`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::{classify, leading_main_term_specs, GraphKind, SliceKind};
use super::momentum::{GraphSpec, Lin, ResolvedGraph};
use crate::error::{Error, Result};
use crate::kinetics::KineticKernel;
use crate::lattice::LatticeConfig;
use crate::numerics::extrapolate_to_zero;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const TIME_CHUNKS: usize = 8;

/// Largest number of motives accepted by [`eval_leading_sum`].
pub const MAX_MOTIVES: usize = 2;

/// Grid values of a factor, either shared by every `ε` or one array per `ε`.
#[derive(Debug, Clone)]
enum Values {
    Shared(Arc<Vec<Complex64>>),
    PerEps(Vec<Arc<Vec<Complex64>>>),
}

impl Values {
    fn get(&self, e: usize) -> &[Complex64] {
        match self {
            Values::Shared(v) => v,
            Values::PerEps(v) => &v[e],
        }
    }

    fn per_eps(&self) -> bool {
        matches!(self, Values::PerEps(_))
    }
}

/// One factor `F(L)` of the loop integrand, `L` a linear form in the free
/// momenta.  Every factor function is even.
#[derive(Debug, Clone)]
enum FactorKind {
    Static(Values),
    /// `e^{−i s c ω(L)}` with `s` the time variable of the given vertex.
    Phase { vertex: usize, coeff: i32 },
}

#[derive(Debug, Clone)]
struct Factor {
    form: Lin,
    kind: FactorKind,
}

/// Grid data shared by all amplitude evaluations.
struct Grid<'a> {
    kernel: &'a KineticKernel,
    lattice: LatticeConfig,
    nodes: Vec<(f64, f64)>,
    eps: Vec<f64>,
}

impl<'a> Grid<'a> {
    fn new(kernel: &'a KineticKernel) -> Self {
        Self {
            kernel,
            lattice: kernel.lattice(),
            nodes: kernel.config().nodes(),
            eps: kernel.config().epsilon_ladder.clone(),
        }
    }

    fn size(&self) -> usize {
        self.lattice.volume()
    }

    fn scale_map(&self, c: i64) -> Vec<usize> {
        (0..self.size()).map(|x| self.lattice.scale_index(x, c)).collect()
    }
}

/// Loop-momentum group of a factor at a degree-two vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    First,
    Second,
    Both(i8),
}

struct Grouped {
    /// `(remainder multiple of q, factors)` for the three slots.
    first: (Option<i8>, Vec<Factor>),
    second: (Option<i8>, Vec<Factor>),
    both: (Option<(i8, i8)>, Vec<Factor>),
    /// Time factors of this vertex that depend on `q` only: `(c, coeff)`.
    q_phases: Vec<(i8, i32)>,
}

fn group_factors(factors: Vec<Factor>, b1: usize, b2: usize, q: &Lin, vertex: usize) -> Result<(Grouped, Vec<Factor>)> {
    let mut g = Grouped { first: (None, vec![]), second: (None, vec![]), both: (None, vec![]), q_phases: vec![] };
    let mut rest = Vec::new();
    let unsupported = |what: String| Error::InvalidInput(format!("loop structure at v_{vertex} is not a leading motive: {what}"));
    for mut f in factors {
        let (a1, a2) = (f.form.coeff(b1), f.form.coeff(b2));
        let own_phase = matches!(f.kind, FactorKind::Phase { vertex: v, .. } if v == vertex);
        if a1 == 0 && a2 == 0 {
            if own_phase {
                let c = f.form.multiple_of(q).ok_or_else(|| unsupported(format!("phase {} is not a multiple of q", f.form)))?;
                if let FactorKind::Phase { coeff, .. } = f.kind {
                    g.q_phases.push((c, coeff));
                }
            } else {
                rest.push(f);
            }
            continue;
        }
        if matches!(f.kind, FactorKind::Phase { vertex: v, .. } if v != vertex) {
            return Err(unsupported("a later time variable depends on the loop".into()));
        }
        if a1 < 0 || (a1 == 0 && a2 < 0) {
            f.form = f.form.neg();
        }
        let (a1, a2) = (f.form.coeff(b1), f.form.coeff(b2));
        let slot = match (a1, a2) {
            (1, 0) => Slot::First,
            (0, 1) => Slot::Second,
            (1, s) if s.abs() == 1 => Slot::Both(s),
            _ => return Err(unsupported(format!("form {}", f.form))),
        };
        let rem = f.form.sub(&Lin::basis(b1).scale(a1)).sub(&Lin::basis(b2).scale(a2));
        let c = rem.multiple_of(q).ok_or_else(|| unsupported(format!("remainder {rem} of {}", f.form)))?;
        match slot {
            Slot::First => {
                if *g.first.0.get_or_insert(c) != c {
                    return Err(unsupported("inconsistent shifts".into()));
                }
                g.first.1.push(f);
            }
            Slot::Second => {
                if *g.second.0.get_or_insert(c) != c {
                    return Err(unsupported("inconsistent shifts".into()));
                }
                g.second.1.push(f);
            }
            Slot::Both(s) => {
                if *g.both.0.get_or_insert((s, c)) != (s, c) {
                    return Err(unsupported("inconsistent shifts".into()));
                }
                g.both.1.push(f);
            }
        }
    }
    Ok((g, rest))
}

/// Pointwise product of a slot's factors at time `s` for regulator `e`.
fn slot_values(grid: &Grid, factors: &[Factor], s: f64, e: usize) -> Vec<Complex64> {
    let omega = grid.kernel.omega();
    let mut out = vec![Complex64::new(1.0, 0.0); grid.size()];
    for f in factors {
        match &f.kind {
            FactorKind::Static(v) => out.iter_mut().zip(v.get(e)).for_each(|(o, x)| *o *= x),
            FactorKind::Phase { coeff, .. } => out
                .iter_mut()
                .zip(omega)
                .for_each(|(o, w)| *o *= Complex64::from_polar(1.0, -s * *coeff as f64 * w)),
        }
    }
    out
}

/// `D(x) = ∫du dw A(u) B(w) C(u + w + x)` for even `A, B, C`.
fn triple_convolution(grid: &Grid, mut a: Vec<Complex64>, mut b: Vec<Complex64>, mut c: Vec<Complex64>) -> Vec<Complex64> {
    let fft = grid.kernel.fft();
    fft.inverse(&mut a);
    fft.inverse(&mut b);
    fft.inverse(&mut c);
    for ((x, y), z) in c.iter_mut().zip(&a).zip(&b) {
        *x *= y * z;
    }
    fft.forward(&mut c);
    c
}

/// Integrates out the double loop of the degree-two vertex `v_j`, returning
/// the new factor of the parent momentum and the untouched factors.
fn peel(grid: &Grid, r: &ResolvedGraph, j: usize, factors: Vec<Factor>) -> Result<Vec<Factor>> {
    let g = &r.graph;
    let v = g.fusion[j - 1];
    let free: Vec<usize> = g.lower_edges(v).iter().copied().filter(|&e| !r.tree.in_tree[e]).collect();
    let (b1, b2) = (r.tree.free_index(free[0]).unwrap(), r.tree.free_index(free[1]).unwrap());
    let q = r.momenta[g.upper_edge(v)];
    let (gr, mut rest) = group_factors(factors, b1, b2, &q, j)?;
    let (c1, c2) = (gr.first.0.unwrap_or(0), gr.second.0.unwrap_or(0));
    let (tau, c3) = gr.both.0.unwrap_or((1, 0));
    if tau != 1 {
        return Err(Error::InvalidInput(format!("loop at v_{j} couples f₁ − f₂; expected f₁ + f₂")));
    }
    let d = c3 - c1 - c2;
    let d_map = grid.scale_map(d as i64);
    let q_maps: Vec<(Vec<usize>, i32)> = gr.q_phases.iter().map(|&(c, k)| (grid.scale_map(c as i64), k)).collect();
    let omega = grid.kernel.omega();
    let n_eps = grid.eps.len();
    let eps_dependent = [&gr.first.1, &gr.second.1, &gr.both.1].iter().any(|fs| fs.iter().any(|f| {
        matches!(&f.kind, FactorKind::Static(v) if v.per_eps())
    }));
    let size = grid.size();
    let chunk = grid.nodes.len().div_ceil(TIME_CHUNKS);
    let partials: Vec<Vec<Vec<Complex64>>> = grid
        .nodes
        .par_chunks(chunk)
        .map(|part| {
            let mut acc = vec![vec![ZERO; size]; n_eps];
            for &(s, wt) in part {
                let q_factor: Vec<Complex64> = (0..size)
                    .map(|x| {
                        q_maps.iter().fold(Complex64::new(1.0, 0.0), |p, (map, k)| {
                            p * Complex64::from_polar(1.0, -s * *k as f64 * omega[map[x]])
                        })
                    })
                    .collect();
                let runs = if eps_dependent { n_eps } else { 1 };
                for e in 0..runs {
                    let dd = triple_convolution(
                        grid,
                        slot_values(grid, &gr.first.1, s, e),
                        slot_values(grid, &gr.second.1, s, e),
                        slot_values(grid, &gr.both.1, s, e),
                    );
                    let targets: Vec<usize> = if eps_dependent { vec![e] } else { (0..n_eps).collect() };
                    for t in targets {
                        let w = wt * (-grid.eps[t] * s).exp();
                        for x in 0..size {
                            acc[t][x] += dd[d_map[x]] * q_factor[x] * w;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![vec![ZERO; size]; n_eps];
    for acc in partials {
        for (t, a) in total.iter_mut().zip(acc) {
            t.iter_mut().zip(a).for_each(|(x, y)| *x += y);
        }
    }
    rest.push(Factor { form: q, kind: FactorKind::Static(Values::PerEps(total.into_iter().map(Arc::new).collect())) });
    Ok(rest)
}

/// `Π_j σ(𝓔₊(v_j))` over the interaction vertices.
pub fn vertex_sign(r: &ResolvedGraph) -> i8 {
    let g = &r.graph;
    (1..=g.interactions()).map(|j| g.edges[g.upper_edge(g.fusion[j - 1])].parity.unwrap()).product()
}

/// `P_g(k)` for each `ε` of the ladder.
fn amplitude_series(grid: &Grid, spec: &GraphSpec, k_index: usize) -> Result<Vec<Complex64>> {
    let r = ResolvedGraph::build(spec)?;
    let class = classify(&r);
    if class.kind != GraphKind::Leading {
        return Err(Error::InvalidInput(format!("graph is {}, not leading", class.kind.as_str())));
    }
    let g = &r.graph;
    let w = Arc::new(grid.kernel.covariance().iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
    let first = spec.first_label();
    let mut factors: Vec<Factor> = spec
        .partition
        .blocks
        .iter()
        .map(|b| {
            let e = g.upper_edge(g.initial[b[0] - first]);
            Factor { form: r.momenta[e], kind: FactorKind::Static(Values::Shared(w.clone())) }
        })
        .collect();
    for (m, kind) in class.slices.iter().enumerate() {
        let phase = r.slice_phase(m);
        match kind {
            SliceKind::Short => factors.extend(
                phase.terms().iter().map(|(l, c)| Factor { form: *l, kind: FactorKind::Phase { vertex: m + 1, coeff: *c } }),
            ),
            _ if !phase.is_zero() => {
                return Err(Error::InvalidInput(format!("long slice {m} of a leading graph has phase {phase}")));
            }
            _ => {}
        }
    }
    for j in 1..=g.interactions() {
        if class.degrees[j - 1] == 2 {
            factors = peel(grid, &r, j, factors)?;
        }
    }
    let ext = r.momenta[g.lower_edges(g.fusion[g.interactions()])[0]];
    let ext_basis = ext.support().next();
    let mut out = vec![Complex64::new(vertex_sign(&r) as f64, 0.0); grid.eps.len()];
    for f in &factors {
        let c = match ext_basis {
            Some(b) if f.form.support().all(|i| i == b) => f.form.coeff(b),
            None if f.form.is_zero() => 0,
            _ => return Err(Error::InvalidInput(format!("factor {} survives the loop integrals", f.form))),
        };
        let idx = grid.lattice.scale_index(k_index, c as i64);
        match &f.kind {
            FactorKind::Static(v) => out.iter_mut().enumerate().for_each(|(e, o)| *o *= v.get(e)[idx]),
            FactorKind::Phase { .. } => return Err(Error::InvalidInput("time phase outside any loop".into())),
        }
    }
    Ok(out)
}

/// Result of [`eval_leading_sum`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadingSum {
    pub m: usize,
    pub k: Vec<f64>,
    pub t: f64,
    /// Number of leading graphs summed.
    pub graphs: usize,
    /// `Σ_g sign_g P_g(k)` for each `ε` of the ladder.
    pub per_epsilon: Vec<Complex64>,
    /// Extrapolation `ε → 0` of `per_epsilon`, the kinetic prediction
    /// `W(k) Γ(k)^m`.
    pub motive_sum: Complex64,
    /// Difference between the full and the reduced extrapolation.
    pub error: Complex64,
    /// `(−t)^m/m! · motive_sum`.
    pub value: Complex64,
}

/// Sums the kinetic-limit amplitudes of all leading main-term graphs with
/// `2m` interactions at the grid momentum `k`.
pub fn eval_leading_sum(kernel: &KineticKernel, m: usize, k: &[f64], t: f64) -> Result<LeadingSum> {
    if m > MAX_MOTIVES {
        return Err(Error::Guard(format!("m = {m} exceeds {MAX_MOTIVES}")));
    }
    let lattice = kernel.lattice();
    let k_index = lattice
        .momentum_index(k)
        .ok_or_else(|| Error::InvalidInput(format!("k = {k:?} is not on the {}-point grid", lattice.l())))?;
    let grid = Grid::new(kernel);
    let specs = leading_main_term_specs(2 * m)?;
    let mut per_epsilon = vec![ZERO; grid.eps.len()];
    for spec in &specs {
        let a = amplitude_series(&grid, spec, k_index)?;
        per_epsilon.iter_mut().zip(a).for_each(|(s, v)| *s += v);
    }
    let (motive_sum, error) = extrapolate_to_zero(&grid.eps, &per_epsilon);
    let fact: f64 = (1..=m).map(|i| i as f64).product();
    let value = motive_sum * (-t).powi(m as i32) / fact;
    Ok(LeadingSum { m, k: k.to_vec(), t, graphs: specs.len(), per_epsilon, motive_sum, error, value })
}

/// Amplitude series of a single leading main-term graph, for diagnostics.
pub fn leading_amplitude(kernel: &KineticKernel, spec: &GraphSpec, k: &[f64]) -> Result<Vec<Complex64>> {
    let lattice = kernel.lattice();
    let k_index = lattice
        .momentum_index(k)
        .ok_or_else(|| Error::InvalidInput(format!("k = {k:?} is not on the grid")))?;
    amplitude_series(&Grid::new(kernel), spec, k_index)
}

/// Sum over all twelve motives attached to a pairing with left-leg parity
/// `σ` and momentum `k₀`, integrated over `s ∈ [0, horizon]`:
/// `∫ds ∫dk₁dk₂ [e^{−isΩ(k,σ)}(−2W₁W₂W₃ + 2σW₀W₁W₂ + 2W₀W₁W₃ − 2σW₀W₂W₃)
/// + e^{−isΩ(k,−σ)}(−2W₁W₂W₃ − 2σW₀W₁W₂ + 2W₀W₁W₃ + 2σW₀W₂W₃)]`
/// with `k₃ = k₀ − k₁ − k₂`.  Returned for every `k₀` on the grid.  The
/// sum vanishes as the horizon grows because `W` is stationary under the
/// kinetic collision operator.
pub fn stationarity_subsum(kernel: &KineticKernel, sigma: i8, horizon: f64, dt: f64) -> Result<Vec<Complex64>> {
    if sigma.abs() != 1 {
        return Err(Error::InvalidInput("σ must be ±1".into()));
    }
    if !(horizon > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidInput("horizon and dt must be positive".into()));
    }
    let grid = Grid::new(kernel);
    let size = grid.size();
    let omega = kernel.omega();
    let w = kernel.covariance();
    let steps = (horizon / dt).round().max(1.0) as usize;
    let h = horizon / steps as f64;
    let sg = sigma as f64;
    let nodes: Vec<(f64, f64)> = (0..=steps)
        .map(|i| (i as f64 * h, if i == 0 || i == steps { 0.5 * h } else { h }))
        .collect();
    let neg: Vec<usize> = (0..size).map(|x| grid.lattice.neg_index(x)).collect();
    let chunk = nodes.len().div_ceil(TIME_CHUNKS);
    let partials: Vec<Vec<Complex64>> = nodes
        .par_chunks(chunk)
        .map(|part| {
            let mut acc = vec![ZERO; size];
            for &(s, wt) in part {
                for tau in [1.0, -1.0] {
                    let p = tau * sg;
                    // Ω = ω₃ − ω₁ + p(ω₂ − ω₀): k₁ ↦ e^{isω₁}, k₂ ↦ e^{−ispω₂}, k₃ ↦ e^{−isω₃}.
                    let e1: Vec<Complex64> = omega.iter().map(|&o| Complex64::from_polar(1.0, s * o)).collect();
                    let e2: Vec<Complex64> = omega.iter().map(|&o| Complex64::from_polar(1.0, -s * p * o)).collect();
                    let e3: Vec<Complex64> = omega.iter().map(|&o| Complex64::from_polar(1.0, -s * o)).collect();
                    let with_w = |e: &[Complex64], on: bool| -> Vec<Complex64> {
                        e.iter().zip(w).map(|(x, &y)| if on { x * y } else { *x }).collect()
                    };
                    // (coefficient, W₀, W₁, W₂, W₃)
                    let terms = [
                        (-2.0, false, true, true, true),
                        (2.0 * p, true, true, true, false),
                        (2.0, true, true, false, true),
                        (-2.0 * p, true, false, true, true),
                    ];
                    for (coef, w0, w1, w2, w3) in terms {
                        let d = triple_convolution(&grid, with_w(&e1, w1), with_w(&e2, w2), with_w(&e3, w3));
                        for x in 0..size {
                            let outer = Complex64::from_polar(1.0, s * p * omega[x]) * if w0 { w[x] } else { 1.0 };
                            acc[x] += d[neg[x]] * outer * coef * wt;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![ZERO; size];
    for acc in partials {
        total.iter_mut().zip(acc).for_each(|(t, a)| *t += a);
    }
    Ok(total)
}
