//! Momentum graphs, their time-ordered spanning trees and the resolution of
//! the Kirchhoff constraints in terms of free momenta.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::enumerate::{ClusterPartition, InteractionHistory, Interlacing};
use crate::error::{Error, Result};

/// Capacity of the free-momentum basis.  Graphs with `N ≤ 8` interactions
/// have at most `2N+1 = 17` free edges.
pub const MAX_FREE: usize = 24;

/// Largest total interaction count accepted by the graph builder.
pub const MAX_INTERACTIONS: usize = 8;

/// Integer linear form `Σ_f c_f k_f` over the free momenta, `c_f ∈ ℤ`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lin {
    c: [i8; MAX_FREE],
}

impl Default for Lin {
    fn default() -> Self {
        Self::zero()
    }
}

impl fmt::Debug for Lin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lin({})", self)
    }
}

impl fmt::Display for Lin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.c.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let sign = if c < 0 { "-" } else if first { "" } else { "+" };
            let mag = c.unsigned_abs();
            if mag == 1 {
                write!(f, "{sign}f{i}")?;
            } else {
                write!(f, "{sign}{mag}f{i}")?;
            }
            first = false;
        }
        Ok(())
    }
}

impl Lin {
    pub const fn zero() -> Self {
        Self { c: [0; MAX_FREE] }
    }

    pub fn basis(i: usize) -> Self {
        let mut l = Self::zero();
        l.c[i] = 1;
        l
    }

    pub fn coeff(&self, i: usize) -> i8 {
        self.c[i]
    }

    pub fn coeffs(&self) -> &[i8; MAX_FREE] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0)
    }

    pub fn add(&self, o: &Lin) -> Lin {
        let mut r = *self;
        r.c.iter_mut().zip(&o.c).for_each(|(a, b)| *a += b);
        r
    }

    pub fn sub(&self, o: &Lin) -> Lin {
        let mut r = *self;
        r.c.iter_mut().zip(&o.c).for_each(|(a, b)| *a -= b);
        r
    }

    pub fn scale(&self, s: i8) -> Lin {
        let mut r = *self;
        r.c.iter_mut().for_each(|a| *a *= s);
        r
    }

    pub fn neg(&self) -> Lin {
        self.scale(-1)
    }

    /// Indices with non-zero coefficient.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.c.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| i)
    }

    /// Whether every coefficient lies in `{−1, 0, 1}`.
    pub fn is_unit(&self) -> bool {
        self.c.iter().all(|v| v.abs() <= 1)
    }

    /// Representative of `±self` whose first non-zero coefficient is
    /// positive, together with the sign that maps `self` onto it.
    pub fn canonical(&self) -> (Lin, i8) {
        match self.c.iter().find(|&&v| v != 0) {
            Some(&v) if v < 0 => (self.neg(), -1),
            _ => (*self, 1),
        }
    }

    /// `q` such that `self = q·base`, if any.
    pub fn multiple_of(&self, base: &Lin) -> Option<i8> {
        if self.is_zero() {
            return Some(0);
        }
        let i = base.support().next()?;
        let b = base.c[i];
        let a = self.c[i];
        if b == 0 || a % b != 0 {
            return None;
        }
        let q = a / b;
        (base.scale(q) == *self).then_some(q)
    }

    /// Numeric value `Σ_f c_f k_f` for free momenta `values[f]`.
    pub fn eval(&self, values: &[Vec<f64>]) -> Vec<f64> {
        let d = values.first().map_or(0, |v| v.len());
        let mut out = vec![0.0; d];
        for i in self.support() {
            for (o, v) in out.iter_mut().zip(&values[i]) {
                *o += self.c[i] as f64 * v;
            }
        }
        out
    }
}

/// Signed sum `Σ c_j ω(L_j)` of dispersion values at linear forms, kept in
/// canonical form: each form is reduced to its `±` representative (`ω` is
/// even), equal forms are merged and vanishing coefficients dropped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Phase {
    terms: Vec<(Lin, i32)>,
}

impl Phase {
    pub fn from_terms<I: IntoIterator<Item = (i32, Lin)>>(terms: I) -> Self {
        let mut v: Vec<(Lin, i32)> = terms.into_iter().map(|(c, l)| (l.canonical().0, c)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Lin, i32)> = Vec::with_capacity(v.len());
        for (l, c) in v {
            match merged.last_mut() {
                Some((pl, pc)) if *pl == l => *pc += c,
                _ => merged.push((l, c)),
            }
        }
        merged.retain(|(_, c)| *c != 0);
        Self { terms: merged }
    }

    pub fn terms(&self) -> &[(Lin, i32)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn sub(&self, o: &Phase) -> Phase {
        Phase::from_terms(
            self.terms
                .iter()
                .map(|(l, c)| (*c, *l))
                .chain(o.terms.iter().map(|(l, c)| (-*c, *l))),
        )
    }

    pub fn add(&self, o: &Phase) -> Phase {
        Phase::from_terms(self.terms.iter().chain(&o.terms).map(|(l, c)| (*c, *l)))
    }

    /// Whether some surviving term involves free momentum `f`.
    pub fn depends_on(&self, f: usize) -> bool {
        self.terms.iter().any(|(l, _)| l.coeff(f) != 0)
    }

    /// Numeric value for free momenta `values` and dispersion `omega`.
    pub fn eval<F: Fn(&[f64]) -> f64>(&self, values: &[Vec<f64>], omega: F) -> f64 {
        self.terms.iter().map(|(l, c)| *c as f64 * omega(&l.eval(values))).sum()
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (l, c)) in self.terms.iter().enumerate() {
            let sign = if *c < 0 { "-" } else if i == 0 { "" } else { "+" };
            let mag = c.unsigned_abs();
            if mag == 1 {
                write!(f, "{sign}w({l})")?;
            } else {
                write!(f, "{sign}{mag}w({l})")?;
            }
        }
        Ok(())
    }
}

/// The parameters `(S, J, n, ℓ, n′, ℓ′)` of a momentum graph.
///
/// Initial-time fields are labelled left to right, minus tree first.  When
/// `n′ = 0` the labels run over `0..=2n+1` with `0` the single minus line;
/// otherwise they run over `1..=2N+2`.  Both trees use the same line rule:
/// the children of a line with parity `σ` carry `(−1, σ, +1)` left to
/// right, and `ℓ′` indexes the minus-tree lines in that drawn order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphSpec {
    pub partition: ClusterPartition,
    pub interlacing: Interlacing,
    pub ell: Vec<usize>,
    pub ell_minus: Vec<usize>,
    /// Whether the two lowest slices have zero length.
    pub amputated: bool,
}

impl GraphSpec {
    pub fn new(partition: ClusterPartition, interlacing: Interlacing, ell: Vec<usize>, ell_minus: Vec<usize>) -> Result<Self> {
        let s = Self { partition, interlacing, ell, ell_minus, amputated: false };
        s.validate()?;
        Ok(s)
    }

    /// A main-term graph: no interactions in the minus tree.
    pub fn main_term(ell: Vec<usize>, partition: ClusterPartition) -> Result<Self> {
        let n = ell.len();
        Self::new(partition, Interlacing::all_plus(n), ell, Vec::new())
    }

    /// An amputated graph with `n = n′ = ℓ.len()`.  The two lowest fusions
    /// are placed in the minus and then the plus tree, followed by `rest`,
    /// which must interlace `(n−1, n−1)`.
    pub fn amputated(partition: ClusterPartition, rest: Interlacing, ell: Vec<usize>, ell_minus: Vec<usize>) -> Result<Self> {
        let mut j = vec![-1, 1];
        j.extend_from_slice(&rest.j);
        let s = Self { partition, interlacing: Interlacing::new(j)?, ell, ell_minus, amputated: true };
        s.validate()?;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.ell.len()
    }

    pub fn n_minus(&self) -> usize {
        self.ell_minus.len()
    }

    pub fn total(&self) -> usize {
        self.n() + self.n_minus()
    }

    /// Label of the leftmost initial-time field.
    pub fn first_label(&self) -> usize {
        usize::from(self.n_minus() > 0)
    }

    /// All initial-time labels, left to right.
    pub fn labels(&self) -> Vec<usize> {
        let f = self.first_label();
        (f..f + 2 * self.total() + 2).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, nm) = (self.n(), self.n_minus());
        if n + nm > MAX_INTERACTIONS {
            return Err(Error::Guard(format!("N = {} exceeds {MAX_INTERACTIONS}", n + nm)));
        }
        InteractionHistory::new(1, self.ell.clone())?;
        InteractionHistory::new(1, self.ell_minus.clone())?;
        let j = &self.interlacing;
        if j.len() != n + nm || j.n_plus() != n {
            return Err(Error::InvalidInput(format!(
                "interlacing {:?} does not interlace ({n}, {nm})",
                j.j
            )));
        }
        if self.amputated && (n == 0 || nm == 0 || j.j[0] != -1 || j.j[1] != 1) {
            return Err(Error::InvalidInput("amputated graphs start with a minus and then a plus fusion".into()));
        }
        if !self.partition.covers(&self.labels()) {
            return Err(Error::InvalidInput(format!(
                "partition {:?} does not cover labels {:?}",
                self.partition.blocks,
                self.labels()
            )));
        }
        Ok(())
    }
}

/// Role of a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexKind {
    Root,
    /// Fusion vertex `v_j`, `1 ≤ j ≤ N+1`; `v_{N+1}` joins the two trees.
    Fusion(usize),
    /// Initial-time vertex carrying the field with the given label.
    Initial(usize),
    /// Cluster vertex of the given block of the partition.
    Cluster(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub kind: VertexKind,
    pub tau: usize,
}

/// Which tree a line belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TreeSide {
    Minus,
    Plus,
}

/// An edge in creation order.  `from` is the vertex that existed when the
/// edge was created (the upper end of a line), `to` the other end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Parity of a tree line; `None` for `e₀` and cluster edges.
    pub parity: Option<i8>,
    pub side: Option<TreeSide>,
}

/// The momentum graph of a [`GraphSpec`].
#[derive(Debug, Clone)]
pub struct MomentumGraph {
    pub spec: GraphSpec,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    /// Incident edges of each vertex in creation order.
    pub incident: Vec<Vec<usize>>,
    /// Vertex id of `v_j` at index `j−1`, for `j = 1, …, N+1`.
    pub fusion: Vec<usize>,
    /// Vertex id of each initial-time field, left to right.
    pub initial: Vec<usize>,
}

pub const ROOT: usize = 0;

impl MomentumGraph {
    /// Builds the graph in the prescribed creation order: `e₀`, the two tree
    /// roots `e₁` (minus) and `e₂` (plus), one triplet per interaction going
    /// backwards in time, and finally the cluster edges of the initial
    /// vertices taken left to right.
    pub fn build(spec: &GraphSpec) -> Result<Self> {
        spec.validate()?;
        let big_n = spec.total();
        let mut g = MomentumGraph {
            spec: spec.clone(),
            vertices: Vec::with_capacity(4 * big_n + 8),
            edges: Vec::with_capacity(5 * big_n + 5),
            incident: Vec::with_capacity(4 * big_n + 8),
            fusion: vec![usize::MAX; big_n + 1],
            initial: Vec::with_capacity(2 * big_n + 2),
        };
        g.add_vertex(VertexKind::Root, big_n + 2);
        let top = g.add_vertex(VertexKind::Fusion(big_n + 1), big_n + 1);
        g.fusion[big_n] = top;
        g.add_edge(ROOT, top, None, None);
        let e1 = g.attach(top, -1, TreeSide::Minus);
        let e2 = g.attach(top, 1, TreeSide::Plus);
        let mut open_minus = vec![e1];
        let mut open_plus = vec![e2];
        let (mut level_plus, mut level_minus) = (spec.n(), spec.n_minus());
        for j in (1..=big_n).rev() {
            let (open, level, ell, side) = if spec.interlacing.j[j - 1] == 1 {
                (&mut open_plus, &mut level_plus, &spec.ell, TreeSide::Plus)
            } else {
                (&mut open_minus, &mut level_minus, &spec.ell_minus, TreeSide::Minus)
            };
            let idx = ell[*level - 1] - 1;
            if idx >= open.len() {
                return Err(Error::InvalidInput(format!("history index {} out of range at fusion {j}", idx + 1)));
            }
            *level -= 1;
            let e = open[idx];
            let v = g.edges[e].to;
            g.vertices[v] = Vertex { kind: VertexKind::Fusion(j), tau: j };
            g.fusion[j - 1] = v;
            let sigma = g.edges[e].parity.expect("tree line");
            let kids = [g.attach(v, -1, side), g.attach(v, sigma, side), g.attach(v, 1, side)];
            open.splice(idx..=idx, kids);
        }
        let first = spec.first_label();
        for (pos, &e) in open_minus.iter().chain(&open_plus).enumerate() {
            let v = g.edges[e].to;
            g.vertices[v].kind = VertexKind::Initial(first + pos);
            g.initial.push(v);
        }
        let cluster_ids: Vec<usize> =
            (0..spec.partition.len()).map(|b| g.add_vertex(VertexKind::Cluster(b), 0)).collect();
        let block_of = spec.partition.block_of(first + 2 * big_n + 2);
        for pos in 0..g.initial.len() {
            let v = g.initial[pos];
            let b = block_of[first + pos].expect("partition covers all labels");
            g.add_edge(v, cluster_ids[b], None, None);
        }
        Ok(g)
    }

    fn add_vertex(&mut self, kind: VertexKind, tau: usize) -> usize {
        self.vertices.push(Vertex { kind, tau });
        self.incident.push(Vec::new());
        self.vertices.len() - 1
    }

    fn add_edge(&mut self, from: usize, to: usize, parity: Option<i8>, side: Option<TreeSide>) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { from, to, parity, side });
        self.incident[from].push(id);
        self.incident[to].push(id);
        id
    }

    /// Attaches a new line below `v`; the new end stays unlabeled until it
    /// is either fused or becomes an initial-time vertex.
    fn attach(&mut self, v: usize, parity: i8, side: TreeSide) -> usize {
        let u = self.add_vertex(VertexKind::Initial(usize::MAX), 0);
        self.add_edge(v, u, Some(parity), Some(side))
    }

    /// Total number of interactions `N`.
    pub fn interactions(&self) -> usize {
        self.spec.total()
    }

    /// Edge parity map `σ_v(e)`: `+1` on `𝓔₊(v)`, `−1` on `𝓔₋(v)`.  Cluster
    /// vertices have every edge in `𝓔₊`; other vertices only the first one.
    pub fn edge_sign(&self, v: usize, e: usize) -> i8 {
        match self.vertices[v].kind {
            VertexKind::Cluster(_) => 1,
            _ => {
                if self.incident[v][0] == e {
                    1
                } else {
                    -1
                }
            }
        }
    }

    /// `𝓔₋(v)` in creation order (the three lower lines of an interaction).
    pub fn lower_edges(&self, v: usize) -> &[usize] {
        match self.vertices[v].kind {
            VertexKind::Cluster(_) => &[],
            _ => &self.incident[v][1..],
        }
    }

    /// `𝓔₊(v)` for a non-cluster vertex.
    pub fn upper_edge(&self, v: usize) -> usize {
        self.incident[v][0]
    }

    /// Parity of the tree line ending at initial vertex position `pos`.
    pub fn initial_parities(&self) -> Vec<i8> {
        self.initial
            .iter()
            .map(|&v| self.edges[self.incident[v][0]].parity.expect("tree line"))
            .collect()
    }

    /// The other end of edge `e` seen from `v`.
    pub fn other(&self, e: usize, v: usize) -> usize {
        let ed = &self.edges[e];
        if ed.from == v {
            ed.to
        } else {
            ed.from
        }
    }

    /// Lines crossing slice `m`: tree lines with lower end at time `≤ m` and
    /// upper end at time `> m`.  `e₀` never crosses a slice `m ≤ N`.
    pub fn slice_edges(&self, m: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| {
                let ed = &self.edges[e];
                ed.parity.is_some() && self.vertices[ed.to].tau <= m && self.vertices[ed.from].tau > m
            })
            .collect()
    }

    /// Number of connected components after deleting `removed` edges.
    pub fn components_without(&self, removed: &[usize]) -> usize {
        let mut uf = UnionFind::new(self.vertices.len());
        let mut comps = self.vertices.len();
        for (e, ed) in self.edges.iter().enumerate() {
            if !removed.contains(&e) && uf.union(ed.from, ed.to) {
                comps -= 1;
            }
        }
        comps
    }

    /// Builds the spanning tree, orients it towards the root and resolves
    /// all edge momenta.
    pub fn resolve(self) -> ResolvedGraph {
        let tree = SpanningTree::build(&self, TreeOrder::Decreasing);
        let momenta = resolve_momenta(&self, &tree);
        ResolvedGraph { graph: self, tree, momenta }
    }
}

/// Disjoint-set forest with path halving.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the sets of `a` and `b`; returns whether they were disjoint.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Order in which edges are offered to the spanning tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeOrder {
    /// Latest-created first; the tree respects the time ordering.
    Decreasing,
    /// Earliest-created first; used only to cross-check edge counts.
    Increasing,
}

/// Spanning tree rooted at `v_R`, with the outgoing edge `E(v)` of every
/// other vertex.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    pub in_tree: Vec<bool>,
    /// `E(v)`, the tree edge pointing from `v` towards the root.
    pub out_edge: Vec<Option<usize>>,
    /// Free edges in creation order; basis index `i` refers to `free[i]`.
    pub free: Vec<usize>,
    /// Vertices in breadth-first order from the root.
    pub bfs: Vec<usize>,
    /// Parent vertex in the oriented tree.
    pub parent: Vec<Option<usize>>,
    pub depth: Vec<usize>,
}

impl SpanningTree {
    pub fn build(g: &MomentumGraph, order: TreeOrder) -> Self {
        let ne = g.edges.len();
        let mut uf = UnionFind::new(g.vertices.len());
        let mut in_tree = vec![false; ne];
        let mut offer = |e: usize| {
            let ed = &g.edges[e];
            if uf.union(ed.from, ed.to) {
                in_tree[e] = true;
            }
        };
        match order {
            TreeOrder::Decreasing => (0..ne).rev().for_each(&mut offer),
            TreeOrder::Increasing => (0..ne).for_each(&mut offer),
        }
        let nv = g.vertices.len();
        let mut out_edge = vec![None; nv];
        let mut parent = vec![None; nv];
        let mut depth = vec![0; nv];
        let mut seen = vec![false; nv];
        let mut bfs = Vec::with_capacity(nv);
        let mut queue = VecDeque::from([ROOT]);
        seen[ROOT] = true;
        while let Some(v) = queue.pop_front() {
            bfs.push(v);
            for &e in &g.incident[v] {
                if !in_tree[e] {
                    continue;
                }
                let u = g.other(e, v);
                if !seen[u] {
                    seen[u] = true;
                    out_edge[u] = Some(e);
                    parent[u] = Some(v);
                    depth[u] = depth[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        let free = (0..ne).filter(|&e| !in_tree[e]).collect();
        Self { in_tree, out_edge, free, bfs, parent, depth }
    }

    /// Basis index of a free edge.
    pub fn free_index(&self, e: usize) -> Option<usize> {
        self.free.iter().position(|&f| f == e)
    }

    /// Vertices on the tree path from `a` to `b`, both included.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let (mut x, mut y) = (a, b);
        let mut left = vec![x];
        let mut right = vec![y];
        while self.depth[x] > self.depth[y] {
            x = self.parent[x].expect("non-root");
            left.push(x);
        }
        while self.depth[y] > self.depth[x] {
            y = self.parent[y].expect("non-root");
            right.push(y);
        }
        while x != y {
            x = self.parent[x].expect("non-root");
            y = self.parent[y].expect("non-root");
            left.push(x);
            right.push(y);
        }
        right.pop();
        left.extend(right.into_iter().rev());
        left
    }
}

/// Edge momenta as linear forms in the free momenta, obtained by solving the
/// Kirchhoff rule `Σ_{𝓔₊(v)} k_e = Σ_{𝓔₋(v)} k_e` at every non-root vertex
/// for its outgoing tree edge, leaves first.
pub fn resolve_momenta(g: &MomentumGraph, tree: &SpanningTree) -> Vec<Lin> {
    assert!(tree.free.len() <= MAX_FREE, "free-momentum basis exceeds capacity");
    let mut k = vec![Lin::zero(); g.edges.len()];
    for (i, &f) in tree.free.iter().enumerate() {
        k[f] = Lin::basis(i);
    }
    for &v in tree.bfs.iter().rev() {
        let Some(out) = tree.out_edge[v] else { continue };
        let mut s = Lin::zero();
        for &e in &g.incident[v] {
            if e != out {
                s = s.add(&k[e].scale(g.edge_sign(v, e)));
            }
        }
        k[out] = s.scale(-g.edge_sign(v, out));
    }
    k
}

/// A momentum graph with its spanning tree and resolved momenta.
#[derive(Debug, Clone)]
pub struct ResolvedGraph {
    pub graph: MomentumGraph,
    pub tree: SpanningTree,
    pub momenta: Vec<Lin>,
}

impl ResolvedGraph {
    pub fn build(spec: &GraphSpec) -> Result<Self> {
        Ok(MomentumGraph::build(spec)?.resolve())
    }

    pub fn n_free(&self) -> usize {
        self.tree.free.len()
    }

    /// `Σ_{𝓔₊(v)} k_e − Σ_{𝓔₋(v)} k_e`, which must vanish identically.
    pub fn kirchhoff_residual(&self, v: usize) -> Lin {
        let g = &self.graph;
        g.incident[v]
            .iter()
            .fold(Lin::zero(), |acc, &e| acc.add(&self.momenta[e].scale(g.edge_sign(v, e))))
    }

    /// Number of free edges in `𝓔₋(v_j)`.
    pub fn degree(&self, j: usize) -> u8 {
        let v = self.graph.fusion[j - 1];
        self.graph.lower_edges(v).iter().filter(|&&e| !self.tree.in_tree[e]).count() as u8
    }

    /// Degrees of the interaction vertices `v_1, …, v_N`.
    pub fn degrees(&self) -> Vec<u8> {
        (1..=self.graph.interactions()).map(|j| self.degree(j)).collect()
    }

    /// Set of free momenta on which `k_e` depends.
    pub fn free_support(&self, e: usize) -> Vec<usize> {
        self.momenta[e].support().collect()
    }

    /// `Re γ(m) = Σ σ_e ω(k_e)` over the lines crossing slice `m`.
    pub fn slice_phase(&self, m: usize) -> Phase {
        let g = &self.graph;
        Phase::from_terms(
            g.slice_edges(m)
                .into_iter()
                .map(|e| (g.edges[e].parity.unwrap() as i32, self.momenta[e])),
        )
    }

    /// `Ω_j = Σ_{𝓔₋(v_j)} σ_e ω(k_e) − σ_{𝓔₊} ω(k_{𝓔₊})`, which equals
    /// `ω(k₃) − ω(k₁) + σ(ω(k₂) − ω(k₁+k₂+k₃))` for the lower lines
    /// `(k₁, k₂, k₃)` and upper parity `σ`.
    pub fn interaction_phase(&self, j: usize) -> Phase {
        let g = &self.graph;
        let v = g.fusion[j - 1];
        let up = g.upper_edge(v);
        Phase::from_terms(
            g.lower_edges(v)
                .iter()
                .map(|&e| (g.edges[e].parity.unwrap() as i32, self.momenta[e]))
                .chain(std::iter::once((-(g.edges[up].parity.unwrap() as i32), self.momenta[up]))),
        )
    }
}
