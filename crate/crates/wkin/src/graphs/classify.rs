//! Classification of momentum graphs into irrelevant, higher-order,
//! partially paired, leading, nested and crossing graphs, and exhaustive
//! counting of leading graphs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::enumerate::{
    enumerate_histories, enumerate_interlacings, enumerate_partitions, opposite_parity_pairings, ClusterPartition,
    InteractionHistory, Interlacing,
};
use super::momentum::{GraphSpec, MomentumGraph, Phase, ResolvedGraph, VertexKind, MAX_INTERACTIONS};
use crate::error::{Error, Result};

/// Graph categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    Irrelevant,
    HigherOrder,
    PartiallyPaired,
    Leading,
    Nested,
    Crossing,
}

impl GraphKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Irrelevant => "irrelevant",
            Self::HigherOrder => "higher-order",
            Self::PartiallyPaired => "partially-paired",
            Self::Leading => "leading",
            Self::Nested => "nested",
            Self::Crossing => "crossing",
        }
    }
}

/// Time-slice taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SliceKind {
    /// Slice `m < N` followed by a degree-zero vertex, or the top slice.
    Long,
    /// Slice followed by a vertex of non-zero degree.
    Short,
    /// Zero-length slice of an amputated graph.
    Amputated,
}

/// Relation of a long slice to a double-loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoopRelation {
    Independent,
    Nested,
    Crossing,
}

/// The double-loop of a degree-two interaction vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubleLoop {
    /// Index `j` of the vertex `v_j`.
    pub vertex: usize,
    /// The two free edges of `𝓔₋(v_j)`, `f₁ < f₂`, and the third edge.
    pub f1: usize,
    pub f2: usize,
    pub e3: usize,
    /// Interaction index of the X-vertex.
    pub x: Option<usize>,
    /// Interaction indices of the T₁, T₂ and T₃ vertices.
    pub t1: Vec<usize>,
    pub t2: Vec<usize>,
    pub t3: Vec<usize>,
    /// Relation of each long slice `m` to this double-loop.
    pub relations: Vec<(usize, LoopRelation)>,
}

/// Classification result with diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphClass {
    pub kind: GraphKind,
    pub degrees: Vec<u8>,
    pub slices: Vec<SliceKind>,
    /// Index of the last slice in the initial run of trivial long slices;
    /// `None` when slice 0 is already non-trivial or the graph is not fully
    /// paired and relevant.
    pub m0_prime: Option<usize>,
    pub double_loops: Vec<DoubleLoop>,
    /// Vertex whose double-loop decided a nested or crossing class.
    pub deciding_vertex: Option<usize>,
    pub last_crossing_slice: Option<usize>,
}

/// Whether the graph has a non-vanishing amplitude: every cluster must
/// balance its parities and no interaction may have two incoming momenta
/// that cancel identically.
pub fn is_relevant(r: &ResolvedGraph) -> bool {
    let g = &r.graph;
    let first = g.spec.first_label();
    let parities = g.initial_parities();
    for block in &g.spec.partition.blocks {
        let s: i32 = block.iter().map(|&l| parities[l - first] as i32).sum();
        if s != 0 {
            return false;
        }
    }
    for j in 1..=g.interactions() {
        let lower = g.lower_edges(g.fusion[j - 1]);
        for a in 0..3 {
            for b in a + 1..3 {
                if r.momenta[lower[a]].add(&r.momenta[lower[b]]).is_zero() {
                    return false;
                }
            }
        }
    }
    true
}

fn slice_kinds(g: &MomentumGraph, degrees: &[u8]) -> Vec<SliceKind> {
    let n = g.interactions();
    (0..=n)
        .map(|m| {
            if g.spec.amputated && m < 2 {
                SliceKind::Amputated
            } else if m == n || degrees[m] == 0 {
                SliceKind::Long
            } else {
                SliceKind::Short
            }
        })
        .collect()
}

fn double_loop(r: &ResolvedGraph, j: usize, long_phases: &[(usize, Phase)]) -> DoubleLoop {
    let g = &r.graph;
    let v = g.fusion[j - 1];
    let lower = g.lower_edges(v);
    let free: Vec<usize> = lower.iter().copied().filter(|&e| !r.tree.in_tree[e]).collect();
    let e3 = *lower.iter().find(|&&e| r.tree.in_tree[e]).expect("degree-two vertex");
    let (f1, f2) = (free[0], free[1]);
    let path1 = r.tree.path(g.other(f1, v), v);
    let path2 = r.tree.path(g.other(f2, v), v);
    let interaction = |u: usize| match g.vertices[u].kind {
        VertexKind::Fusion(i) if i <= g.interactions() => Some(i),
        _ => None,
    };
    let xi = path1.iter().position(|u| path2.contains(u)).expect("paths meet at v");
    let x = path1[xi];
    let xj = path2.iter().position(|&u| u == x).unwrap();
    let t1 = path1[..xi].iter().filter_map(|&u| interaction(u)).collect();
    let t2 = path2[..xj].iter().filter_map(|&u| interaction(u)).collect();
    let t3 = path1[xi + 1..path1.len() - 1].iter().filter_map(|&u| interaction(u)).collect();

    let (b1, b2) = (r.tree.free_index(f1).unwrap(), r.tree.free_index(f2).unwrap());
    let omega = r.interaction_phase(j);
    let depends = |p: &Phase| p.depends_on(b1) || p.depends_on(b2);
    let relations = long_phases
        .iter()
        .map(|(m, p)| {
            let rel = if !depends(p) {
                LoopRelation::Independent
            } else if !depends(&p.sub(&omega)) {
                LoopRelation::Nested
            } else {
                LoopRelation::Crossing
            };
            (*m, rel)
        })
        .collect();
    DoubleLoop { vertex: j, f1, f2, e3, x: interaction(x), t1, t2, t3, relations }
}

/// Classifies a resolved graph.
pub fn classify(r: &ResolvedGraph) -> GraphClass {
    let g = &r.graph;
    let degrees = r.degrees();
    let slices = slice_kinds(g, &degrees);
    let mut out = GraphClass {
        kind: GraphKind::Irrelevant,
        degrees,
        slices,
        m0_prime: None,
        double_loops: Vec::new(),
        deciding_vertex: None,
        last_crossing_slice: None,
    };
    if !is_relevant(r) {
        return out;
    }
    if !g.spec.partition.is_pairing() {
        out.kind = GraphKind::HigherOrder;
        return out;
    }
    if out.degrees.contains(&1) {
        out.kind = GraphKind::PartiallyPaired;
        return out;
    }
    let long_phases: Vec<(usize, Phase)> = out
        .slices
        .iter()
        .enumerate()
        .filter(|(_, k)| **k == SliceKind::Long)
        .map(|(m, _)| (m, r.slice_phase(m)))
        .collect();
    let first_nontrivial = long_phases.iter().find(|(_, p)| !p.is_zero()).map(|(m, _)| *m);
    out.m0_prime = match first_nontrivial {
        None => Some(g.interactions()),
        Some(0) => None,
        Some(m) => Some(m - 1),
    };
    out.kind = GraphKind::Leading;
    for j in 1..=g.interactions() {
        if out.degrees[j - 1] != 2 {
            continue;
        }
        let dl = double_loop(r, j, &long_phases);
        if out.kind == GraphKind::Leading {
            let dependent: Vec<&(usize, LoopRelation)> =
                dl.relations.iter().filter(|(_, rel)| *rel != LoopRelation::Independent).collect();
            if !dependent.is_empty() {
                out.deciding_vertex = Some(j);
                if dependent.iter().all(|(_, rel)| *rel == LoopRelation::Nested) {
                    out.kind = GraphKind::Nested;
                } else {
                    out.kind = GraphKind::Crossing;
                    out.last_crossing_slice = dependent
                        .iter()
                        .filter(|(_, rel)| *rel == LoopRelation::Crossing)
                        .map(|(m, _)| *m)
                        .max();
                }
            }
        }
        out.double_loops.push(dl);
    }
    out
}

/// Builds, resolves and classifies the graph of `spec`.
pub fn classify_spec(spec: &GraphSpec) -> Result<(ResolvedGraph, GraphClass)> {
    let r = ResolvedGraph::build(spec)?;
    let c = classify(&r);
    Ok((r, c))
}

/// Which `(n, n′)` splits of `N` enter a count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountScope {
    /// `n = N`, `n′ = 0`.
    MainTerm,
    /// Every split `n + n′ = N` and every interlacing.
    AllSplits,
}

/// Largest number of candidate graphs `count_leading` will examine.
pub const MAX_COUNT_WORK: u64 = 2_000_000_000;

/// Result of an exhaustive leading-graph count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeadingCount {
    pub n: usize,
    pub scope: CountScope,
    pub leading: u64,
    /// Graphs examined: histories times opposite-parity pairings.
    pub examined: u64,
    /// Graphs surviving the cluster-scheme degree filter.
    pub classified: u64,
    /// `4^N (N−1)!!`.
    pub bound: u64,
}

impl LeadingCount {
    pub fn within_bound(&self) -> bool {
        self.leading <= self.bound
    }
}

/// `4^N (N−1)!!`, with `(−1)!! = 1`.
pub fn leading_bound(n: usize) -> u64 {
    let df: u64 = (1..n as u64).rev().step_by(2).product();
    4u64.pow(n as u32) * df
}

/// Every `(J, ℓ, ℓ′)` history in a scope.
pub fn histories(n: usize, scope: CountScope) -> Result<Vec<(Interlacing, Vec<usize>, Vec<usize>)>> {
    let splits: Vec<usize> = match scope {
        CountScope::MainTerm => vec![n],
        CountScope::AllSplits => (0..=n).collect(),
    };
    let mut out = Vec::new();
    for np in splits {
        let nm = n - np;
        let plus = enumerate_histories(np, 1)?;
        let minus = enumerate_histories(nm, 1)?;
        let js = if nm == 0 { vec![Interlacing::all_plus(np)] } else { enumerate_interlacings(np, nm)? };
        for j in &js {
            for hp in &plus {
                for hm in &minus {
                    out.push((j.clone(), hp.ell.clone(), hm.ell.clone()));
                }
            }
        }
    }
    Ok(out)
}

/// Parities of the initial-time lines of a history, left to right.
pub fn initial_parities(j: &Interlacing, ell: &[usize], ell_minus: &[usize]) -> Vec<i8> {
    let mut minus = vec![-1i8];
    let mut plus = vec![1i8];
    let (mut ip, mut im) = (ell.len(), ell_minus.len());
    for &side in j.j.iter().rev() {
        let (open, idx) = if side == 1 {
            ip -= 1;
            (&mut plus, ell[ip] - 1)
        } else {
            im -= 1;
            (&mut minus, ell_minus[im] - 1)
        };
        let s = open[idx];
        open.splice(idx..=idx, [-1, s, 1]);
    }
    minus.extend(plus);
    minus
}

/// Candidate filter applied before the full classification in
/// [`count_leading_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prefilter {
    /// Discard graphs with a degree-one vertex.
    NoDegreeOne,
    /// Keep only the degree pattern `(0, 2, 0, 2, …)` of iterated motives.
    Alternating,
}

/// Line bookkeeping of one history for the allocation-free cluster scheme:
/// fusion `i` merges the three union-find nodes `inputs[i]` into node
/// `n_lines + i`.
struct LinePlan {
    n_lines: usize,
    inputs: Vec<[u8; 3]>,
    plus: Vec<u8>,
    minus: Vec<u8>,
}

impl LinePlan {
    fn new(j: &Interlacing, ell: &[usize], ell_minus: &[usize], parities: &[i8]) -> Self {
        let n_lines = parities.len();
        let n_minus_lines = 2 * ell_minus.len() + 1;
        let mut minus: Vec<u8> = (0..n_minus_lines as u8).collect();
        let mut plus: Vec<u8> = (n_minus_lines as u8..n_lines as u8).collect();
        let (mut ip, mut im) = (0, 0);
        let mut inputs = Vec::with_capacity(j.len());
        for (i, &side) in j.j.iter().enumerate() {
            let (open, idx) = if side == 1 {
                ip += 1;
                (&mut plus, ell[ip - 1] - 1)
            } else {
                im += 1;
                (&mut minus, ell_minus[im - 1] - 1)
            };
            inputs.push([open[idx], open[idx + 1], open[idx + 2]]);
            open.splice(idx..idx + 3, [(n_lines + i) as u8]);
        }
        let pos = |s: i8| (0..n_lines as u8).filter(|&p| parities[p as usize] == s).collect();
        Self { n_lines, inputs, plus: pos(1), minus: pos(-1) }
    }

    /// Runs the cluster scheme for the pairing `plus[i] ↔ minus[partner[i]]`
    /// and checks the degrees against the filter, stopping at the first
    /// violation.
    fn accepts(&self, partner: &[u8], filter: Prefilter) -> bool {
        let mut parent = [0u8; 2 * MAX_INTERACTIONS + 2 + MAX_INTERACTIONS];
        for (i, p) in parent.iter_mut().enumerate() {
            *p = i as u8;
        }
        fn find(parent: &mut [u8], mut x: u8) -> u8 {
            while parent[x as usize] != x {
                parent[x as usize] = parent[parent[x as usize] as usize];
                x = parent[x as usize];
            }
            x
        }
        for (i, &m) in partner.iter().enumerate() {
            let a = find(&mut parent, self.plus[i]);
            parent[a as usize] = self.minus[m as usize];
        }
        for (i, inp) in self.inputs.iter().enumerate() {
            let r = [find(&mut parent, inp[0]), find(&mut parent, inp[1]), find(&mut parent, inp[2])];
            let distinct = 1 + usize::from(r[1] != r[0]) + usize::from(r[2] != r[0] && r[2] != r[1]);
            let deg = 3 - distinct;
            let ok = match filter {
                Prefilter::NoDegreeOne => deg != 1,
                Prefilter::Alternating => deg == if i % 2 == 0 { 0 } else { 2 },
            };
            if !ok {
                return false;
            }
            let node = (self.n_lines + i) as u8;
            for x in r {
                parent[x as usize] = node;
            }
        }
        true
    }

    /// Visits every opposite-parity pairing accepted by the filter.
    fn for_each_accepted<F: FnMut(&[u8])>(&self, filter: Prefilter, mut visit: F) -> u64 {
        fn rec<F: FnMut(&[u8])>(
            plan: &LinePlan,
            filter: Prefilter,
            partner: &mut Vec<u8>,
            used: &mut [bool],
            seen: &mut u64,
            visit: &mut F,
        ) {
            if partner.len() == plan.plus.len() {
                *seen += 1;
                if plan.accepts(partner, filter) {
                    visit(partner);
                }
                return;
            }
            for m in 0..used.len() {
                if !used[m] {
                    used[m] = true;
                    partner.push(m as u8);
                    rec(plan, filter, partner, used, seen, visit);
                    partner.pop();
                    used[m] = false;
                }
            }
        }
        let mut seen = 0;
        if self.plus.len() == self.minus.len() {
            let mut used = vec![false; self.minus.len()];
            rec(self, filter, &mut Vec::with_capacity(self.plus.len()), &mut used, &mut seen, &mut visit);
        }
        seen
    }
}

/// Counts leading graphs with `N` interactions by exhaustive enumeration of
/// histories and opposite-parity pairings, discarding candidates whose
/// cluster-scheme degrees are not `(0, 2, 0, 2, …)` before the full
/// classification.
pub fn count_leading(n: usize, scope: CountScope) -> Result<LeadingCount> {
    count_leading_with(n, scope, Prefilter::Alternating)
}

/// [`count_leading`] with an explicit candidate filter.
pub fn count_leading_with(n: usize, scope: CountScope, filter: Prefilter) -> Result<LeadingCount> {
    if n > MAX_INTERACTIONS {
        return Err(Error::Guard(format!("N = {n} exceeds {MAX_INTERACTIONS}")));
    }
    let bound = leading_bound(n);
    if n % 2 == 1 {
        return Ok(LeadingCount { n, scope, leading: 0, examined: 0, classified: 0, bound });
    }
    let hist = histories(n, scope)?;
    let pairings_per: u64 = (1..=(n as u64 + 1)).product();
    let work = hist.len() as u64 * pairings_per;
    if work > MAX_COUNT_WORK {
        return Err(Error::Guard(format!("{work} candidate graphs exceed the limit {MAX_COUNT_WORK}")));
    }
    let (leading, examined, classified) = hist
        .par_iter()
        .map(|(j, ell, ell_minus)| -> Result<(u64, u64, u64)> {
            let parities = initial_parities(j, ell, ell_minus);
            let plan = LinePlan::new(j, ell, ell_minus, &parities);
            let first = usize::from(!ell_minus.is_empty());
            let mut spec = GraphSpec {
                partition: ClusterPartition { blocks: Vec::new() },
                interlacing: j.clone(),
                ell: ell.clone(),
                ell_minus: ell_minus.clone(),
                amputated: false,
            };
            let (mut lead, mut full) = (0, 0);
            let mut failure = None;
            let seen = plan.for_each_accepted(filter, |partner| {
                full += 1;
                spec.partition = ClusterPartition {
                    blocks: partner
                        .iter()
                        .enumerate()
                        .map(|(i, &m)| {
                            let (a, b) = (plan.plus[i] as usize + first, plan.minus[m as usize] as usize + first);
                            vec![a.min(b), a.max(b)]
                        })
                        .collect(),
                }
                .canonical();
                match classify_spec(&spec) {
                    Ok((_, c)) if c.kind == GraphKind::Leading => lead += 1,
                    Ok(_) => {}
                    Err(e) => failure = Some(e),
                }
            });
            match failure {
                Some(e) => Err(e),
                None => Ok((lead, seen, full)),
            }
        })
        .try_reduce(|| (0, 0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2)))?;
    Ok(LeadingCount { n, scope, leading, examined, classified, bound })
}

/// Which partitions of the initial labels [`graph_specs`] combines with
/// each history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionSet {
    /// Pairings joining opposite parities.
    OppositePairings,
    /// All perfect matchings.
    Pairings,
    /// All set partitions.
    All,
}

/// Every graph with `N` interactions in a scope whose partition belongs to
/// the given set, in enumeration order.
pub fn graph_specs(n: usize, scope: CountScope, set: PartitionSet) -> Result<Vec<GraphSpec>> {
    let mut out = Vec::new();
    for_each_graph_spec(n, scope, set, |s| {
        out.push(s);
        Ok(())
    })?;
    Ok(out)
}

/// Streams the graphs of [`graph_specs`] without collecting them; the
/// enumeration stops at the first error returned by `visit`.
pub fn for_each_graph_spec<F>(n: usize, scope: CountScope, set: PartitionSet, mut visit: F) -> Result<()>
where
    F: FnMut(GraphSpec) -> Result<()>,
{
    for (j, ell, ell_minus) in histories(n, scope)? {
        let parities = initial_parities(&j, &ell, &ell_minus);
        let first = usize::from(!ell_minus.is_empty());
        let labels: Vec<usize> = (first..first + parities.len()).collect();
        let parts = match set {
            PartitionSet::OppositePairings => opposite_parity_pairings(&labels, &parities),
            PartitionSet::Pairings => enumerate_partitions(&labels, true)?,
            PartitionSet::All => enumerate_partitions(&labels, false)?,
        };
        for s in parts {
            visit(GraphSpec::new(s, j.clone(), ell.clone(), ell_minus.clone())?)?;
        }
    }
    Ok(())
}

/// Every main-term graph `(ℓ, S)` with `n` interactions and an
/// opposite-parity pairing, in enumeration order.
pub fn main_term_pairing_specs(n: usize) -> Result<Vec<GraphSpec>> {
    let mut out = Vec::new();
    for h in enumerate_histories(n, 1)? {
        let InteractionHistory { ell, .. } = h;
        let j = Interlacing::all_plus(n);
        let parities = initial_parities(&j, &ell, &[]);
        let labels: Vec<usize> = (0..parities.len()).collect();
        for s in opposite_parity_pairings(&labels, &parities) {
            out.push(GraphSpec::main_term(ell.clone(), s)?);
        }
    }
    Ok(out)
}

/// The leading main-term graphs with `n` interactions.
pub fn leading_main_term_specs(n: usize) -> Result<Vec<GraphSpec>> {
    let specs = main_term_pairing_specs(n)?;
    let keep: Vec<bool> = specs
        .par_iter()
        .map(|s| classify_spec(s).map(|(_, c)| c.kind == GraphKind::Leading))
        .collect::<Result<_>>()?;
    Ok(specs.into_iter().zip(keep).filter(|(_, k)| *k).map(|(s, _)| s).collect())
}
