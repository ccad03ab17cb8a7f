use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wkin::dispersion::DispersionRelation;
use wkin::graphs::classify::{
    classify_spec, count_leading, graph_specs, initial_parities, is_relevant, CountScope, GraphKind, LoopRelation, PartitionSet, SliceKind,
};
use wkin::graphs::cluster::ClusterScheme;
use wkin::graphs::dump::dump_graph;
use wkin::graphs::enumerate::{double_factorial_odd, enumerate_histories, ClusterPartition, Interlacing};
use wkin::graphs::expansion::omega_vertex;
use wkin::graphs::momentum::{GraphSpec, MomentumGraph, ResolvedGraph, SpanningTree, TreeOrder, VertexKind};
use wkin::graphs::simplex::{
    resolvent_sides, simplex_integral, simplex_integral_distinct, verify_interlacing_identity,
    verify_resolvent_identity, ContourConfig,
};

fn pairs(p: &[[usize; 2]]) -> ClusterPartition {
    ClusterPartition::new(p.iter().map(|b| b.to_vec()).collect()).unwrap()
}

fn opposite(n: usize) -> Vec<GraphSpec> {
    graph_specs(n, CountScope::AllSplits, PartitionSet::OppositePairings).unwrap()
}

fn small_graphs() -> Vec<GraphSpec> {
    (0..=4).flat_map(opposite).collect()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn history_counts_are_odd_double_factorials() {
    for n in 0..=6 {
        assert_eq!(enumerate_histories(n, 1).unwrap().len() as u64, double_factorial_odd(n));
    }
    assert_eq!(enumerate_histories(4, 1).unwrap().len(), 105);
}

#[test]
fn free_momentum_count_on_exhaustive_small_graphs() {
    let mut specs = small_graphs();
    for n in 0..=2 {
        specs.extend(graph_specs(n, CountScope::AllSplits, PartitionSet::All).unwrap());
    }
    for spec in &specs {
        let r = ResolvedGraph::build(spec).unwrap();
        let want = 2 * spec.total() + 2 - spec.partition.len();
        assert_eq!(r.n_free(), want, "{spec:?}");
        let alt = SpanningTree::build(&r.graph, TreeOrder::Increasing);
        assert_eq!(alt.free.len(), want);
        assert!(r.momenta[0].is_zero());
        for &f in &r.tree.free {
            let from = r.graph.edges[f].from;
            assert!(matches!(r.graph.vertices[from].kind, VertexKind::Fusion(_)));
        }
    }
}

#[test]
fn momenta_satisfy_kirchhoff_and_respect_time_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for spec in small_graphs().iter().step_by(7) {
        let r = ResolvedGraph::build(spec).unwrap();
        let g = &r.graph;
        for v in 1..g.vertices.len() {
            assert!(r.kirchhoff_residual(v).is_zero());
        }
        let values: Vec<Vec<f64>> = (0..r.n_free()).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let numeric: Vec<Vec<f64>> = r.momenta.iter().map(|k| k.eval(&values)).collect();
        for v in 1..g.vertices.len() {
            for axis in 0..3 {
                let s: f64 = g.incident[v].iter().map(|&e| g.edge_sign(v, e) as f64 * numeric[e][axis]).sum();
                let frac = s - s.round();
                assert!(frac.abs() < 1e-12, "vertex {v}: residual {s}");
            }
        }
        for (i, &f) in r.tree.free.iter().enumerate() {
            for e in 0..f {
                assert_eq!(r.momenta[e].coeff(i), 0, "edge {e} depends on later free edge {f}");
            }
        }
        for j in 1..=g.interactions() {
            if r.degree(j) == 2 {
                let v = g.fusion[j - 1];
                let lower = g.lower_edges(v);
                let free: Vec<usize> = lower.iter().map(|&e| r.tree.free_index(e)).flatten().collect();
                let e3 = *lower.iter().find(|&&e| r.tree.in_tree[e]).unwrap();
                for &b in &free {
                    assert_eq!(r.momenta[e3].coeff(b), -1);
                    assert_eq!(r.momenta[g.upper_edge(v)].coeff(b), 0);
                }
            }
        }
    }
}

#[test]
fn equal_free_supports_vanish_or_split_the_graph() {
    for spec in small_graphs() {
        let r = ResolvedGraph::build(&spec).unwrap();
        let supports: Vec<Vec<usize>> = (0..r.momenta.len()).map(|e| r.free_support(e)).collect();
        for e in 0..supports.len() {
            for f in e + 1..supports.len() {
                if supports[e] != supports[f] {
                    continue;
                }
                let both_zero = r.momenta[e].is_zero() && r.momenta[f].is_zero();
                assert!(
                    both_zero || r.graph.components_without(&[e, f]) == 2,
                    "edges {e},{f} of {spec:?}"
                );
            }
        }
    }
}

#[test]
fn zero_momentum_edges_need_an_odd_cluster() {
    for n in 0..=3 {
        for spec in graph_specs(n, CountScope::AllSplits, PartitionSet::All).unwrap() {
            let r = ResolvedGraph::build(&spec).unwrap();
            if r.momenta.iter().skip(1).any(|k| k.is_zero()) {
                assert!(spec.partition.has_odd_block(), "{spec:?}");
            }
        }
    }
}

#[test]
fn cluster_scheme_matches_spanning_tree_degrees() {
    let mut specs = small_graphs();
    specs.extend(graph_specs(3, CountScope::AllSplits, PartitionSet::All).unwrap());
    for spec in &specs {
        let r = ResolvedGraph::build(spec).unwrap();
        let s = ClusterScheme::run(spec);
        assert_eq!(s.degrees, r.degrees(), "{spec:?}");
        for i in 1..s.cluster_counts.len() {
            assert_eq!(s.cluster_counts[i] + 2, s.cluster_counts[i - 1] + s.degrees[i - 1] as usize);
        }
        let (_, class) = classify_spec(spec).unwrap();
        if class.kind != GraphKind::Irrelevant {
            assert!(s.cumulative_bounds_hold());
            let n = spec.total();
            let n1 = s.count_upto(1, n) as isize;
            let n0 = s.count_upto(0, n) as isize;
            let n2 = s.count_upto(2, n) as isize;
            assert_eq!(n2 - n0, s.r());
            assert_eq!(2 * n0, n as isize - s.r() - n1);
        }
    }
}

#[test]
fn fully_paired_graphs_balance_degrees_and_cancel_on_slice_zero() {
    let mut checked = 0;
    for spec in small_graphs() {
        let (r, class) = classify_spec(&spec).unwrap();
        if !matches!(class.kind, GraphKind::Leading | GraphKind::Nested | GraphKind::Crossing) {
            continue;
        }
        checked += 1;
        let n = spec.total();
        let n0 = class.degrees.iter().filter(|&&d| d == 0).count();
        let n2 = class.degrees.iter().filter(|&&d| d == 2).count();
        assert_eq!((n0, n2), (n / 2, n / 2));
        assert!(r.slice_phase(0).is_zero());
        for j in 1..=n {
            assert_eq!(r.slice_phase(j - 1).sub(&r.slice_phase(j)), r.interaction_phase(j));
        }
        let all_trivial = class
            .slices
            .iter()
            .enumerate()
            .all(|(m, k)| *k != SliceKind::Long || r.slice_phase(m).is_zero());
        assert_eq!(class.kind == GraphKind::Leading, all_trivial);
        assert_eq!(class.kind == GraphKind::Leading, class.m0_prime == Some(n));
    }
    assert!(checked > 1000);
}

#[test]
fn classification_is_stable_under_cluster_relabeling() {
    for spec in opposite(4).iter().step_by(13) {
        let (_, a) = classify_spec(spec).unwrap();
        let mut shuffled = spec.clone();
        shuffled.partition.blocks.reverse();
        for b in shuffled.partition.blocks.iter_mut() {
            b.reverse();
        }
        let (_, b) = classify_spec(&shuffled).unwrap();
        assert_eq!(a.kind, b.kind);
        assert_eq!(a.degrees, b.degrees);
        assert_eq!(a.m0_prime, b.m0_prime);
    }
}

#[test]
fn worked_examples_from_the_construction() {
    let base = GraphSpec::main_term(vec![], pairs(&[[0, 1]])).unwrap();
    let r = ResolvedGraph::build(&base).unwrap();
    assert_eq!(r.n_free(), 1);
    assert_eq!(r.graph.components_without(&[0]), 2);

    let lead = GraphSpec::main_term(vec![2, 1], pairs(&[[0, 4], [1, 3], [2, 5]])).unwrap();
    let (r, class) = classify_spec(&lead).unwrap();
    assert_eq!(r.n_free(), 3);
    assert_eq!(class.kind, GraphKind::Leading);
    assert_eq!(class.degrees, vec![0, 2]);
    assert_eq!(ClusterScheme::run(&lead).degrees, vec![0, 2]);

    let higher = GraphSpec::main_term(vec![2, 1], ClusterPartition::new(vec![vec![0, 4], vec![1, 2, 3, 5]]).unwrap()).unwrap();
    assert_eq!(classify_spec(&higher).unwrap().1.kind, GraphKind::HigherOrder);

    // Two immediate recollisions stacked on the main line.
    let stacked = GraphSpec::main_term(vec![3, 1, 2, 1], pairs(&[[0, 9], [1, 3], [2, 6], [4, 8], [5, 7]]));
    if let Ok(spec) = stacked {
        let (_, class) = classify_spec(&spec).unwrap();
        if class.kind != GraphKind::Irrelevant {
            assert!(matches!(class.kind, GraphKind::Leading | GraphKind::Nested | GraphKind::Crossing));
        }
    }
}

#[test]
fn every_leading_graph_is_an_iteration_of_recollisions() {
    let mut by_kind: BTreeMap<&str, usize> = BTreeMap::new();
    for spec in opposite(4) {
        let (_, class) = classify_spec(&spec).unwrap();
        *by_kind.entry(class.kind.as_str()).or_default() += 1;
        if class.kind == GraphKind::Leading {
            assert_eq!(class.degrees, vec![0, 2, 0, 2]);
            for dl in &class.double_loops {
                assert!(dl.relations.iter().all(|(_, r)| *r == LoopRelation::Independent));
            }
        }
    }
    assert_eq!(by_kind["leading"], 768);
    assert_eq!(by_kind.values().sum::<usize>(), 46080);
}

#[test]
fn amputated_graphs_are_constructible() {
    let rest = Interlacing::new(vec![1, -1]).unwrap();
    let labels: Vec<usize> = (1..=10).collect();
    let s = ClusterPartition::new(labels.chunks(2).map(|c| c.to_vec()).collect()).unwrap();
    let spec = GraphSpec::amputated(s, rest, vec![1, 1], vec![1, 1]).unwrap();
    let (r, class) = classify_spec(&spec).unwrap();
    assert_eq!(class.slices[0], SliceKind::Amputated);
    assert_eq!(class.slices[1], SliceKind::Amputated);
    assert_eq!(r.n_free(), 2 * 4 + 2 - 5);
    let bad = Interlacing::new(vec![1, 1]).unwrap();
    let s = ClusterPartition::new(labels.chunks(2).map(|c| c.to_vec()).collect()).unwrap();
    assert!(GraphSpec::amputated(s, bad, vec![1, 1], vec![1, 1]).is_err());
}

#[test]
fn leading_counts() {
    assert_eq!(count_leading(0, CountScope::MainTerm).unwrap().leading, 1);
    let main2 = count_leading(2, CountScope::MainTerm).unwrap();
    assert_eq!(main2.leading, 6);
    let all2 = count_leading(2, CountScope::AllSplits).unwrap();
    assert_eq!(all2.leading, 16);
    assert!(all2.within_bound());
    assert_eq!(count_leading(4, CountScope::MainTerm).unwrap().leading, 228);
    let all4 = count_leading(4, CountScope::AllSplits).unwrap();
    assert_eq!(all4.leading, 768);
    assert!(all4.within_bound());
    assert_eq!(count_leading(5, CountScope::AllSplits).unwrap().leading, 0);
    assert!(count_leading(9, CountScope::MainTerm).is_err());
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn check_golden(name: &str, spec: &GraphSpec) -> GraphKind {
    let (r, class) = classify_spec(spec).unwrap();
    let text = dump_graph(&r, &class);
    let path = golden_path(name);
    if std::env::var_os("WKIN_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &text).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(text, want, "golden record {name} changed");
    class.kind
}

#[test]
fn golden_records() {
    let base = GraphSpec::main_term(vec![], pairs(&[[0, 1]])).unwrap();
    assert_eq!(check_golden("base.txt", &base), GraphKind::Leading);
    let lead = GraphSpec::main_term(vec![2, 1], pairs(&[[0, 4], [1, 3], [2, 5]])).unwrap();
    assert_eq!(check_golden("leading_n2.txt", &lead), GraphKind::Leading);
    let crossing =
        GraphSpec::main_term(vec![3, 1, 3, 1], pairs(&[[0, 4], [1, 9], [2, 6], [3, 8], [5, 7]])).unwrap();
    assert_eq!(check_golden("crossing_n4.txt", &crossing), GraphKind::Crossing);
    let nested = GraphSpec::new(
        pairs(&[[1, 9], [2, 10], [3, 8], [4, 7], [5, 6]]),
        Interlacing::new(vec![-1, -1, 1, -1]).unwrap(),
        vec![1],
        vec![1, 1, 1],
    )
    .unwrap();
    assert_eq!(check_golden("nested_n4.txt", &nested), GraphKind::Nested);
}

#[test]
fn crossing_and_nested_examples_have_the_described_loops() {
    let crossing =
        GraphSpec::main_term(vec![3, 1, 3, 1], pairs(&[[0, 4], [1, 9], [2, 6], [3, 8], [5, 7]])).unwrap();
    let (_, c) = classify_spec(&crossing).unwrap();
    let l3 = &c.double_loops[0];
    let l4 = &c.double_loops[1];
    assert_eq!((l3.vertex, l3.x, l3.t3.clone()), (3, Some(1), vec![2]));
    assert_eq!((l4.vertex, l4.x, l4.t3.clone()), (4, Some(2), vec![3]));
    assert!(l3.relations.contains(&(1, LoopRelation::Crossing)));
    assert!(l4.relations.contains(&(1, LoopRelation::Independent)));
    assert_eq!(c.last_crossing_slice, Some(1));

    let nested = GraphSpec::new(
        pairs(&[[1, 9], [2, 10], [3, 8], [4, 7], [5, 6]]),
        Interlacing::new(vec![-1, -1, 1, -1]).unwrap(),
        vec![1],
        vec![1, 1, 1],
    )
    .unwrap();
    let (_, c) = classify_spec(&nested).unwrap();
    assert_eq!(c.double_loops[0].x, Some(1));
    assert_eq!(c.double_loops[1].x, Some(2));
    assert!(c.double_loops[0].relations.contains(&(1, LoopRelation::Nested)));
    assert!(c.double_loops[1].relations.contains(&(1, LoopRelation::Independent)));
}

fn random_history(rng: &mut ChaCha8Rng) -> (Interlacing, Vec<usize>, Vec<usize>) {
    let n_total = rng.random_range(0..=6usize);
    let n = rng.random_range(0..=n_total);
    let nm = n_total - n;
    let hist = |rng: &mut ChaCha8Rng, k: usize| -> Vec<usize> {
        (0..k).map(|i| rng.random_range(1..=1 + 2 * (k - 1 - i))).collect()
    };
    let ell = hist(rng, n);
    let ell_minus = hist(rng, nm);
    let mut j: Vec<i8> = [vec![1i8; n], vec![-1i8; nm]].concat();
    for i in (1..j.len()).rev() {
        let k = rng.random_range(0..=i);
        j.swap(i, k);
    }
    (Interlacing::new(j).unwrap(), ell, ell_minus)
}

/// Random history with a uniformly grown random set partition, `N ≤ 6`.
fn random_spec(rng: &mut ChaCha8Rng) -> GraphSpec {
    let (j, ell, ell_minus) = random_history(rng);
    let first = usize::from(!ell_minus.is_empty());
    let size = 2 * (ell.len() + ell_minus.len()) + 2;
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for l in first..first + size {
        let b = rng.random_range(0..=blocks.len());
        if b == blocks.len() {
            blocks.push(vec![l]);
        } else {
            blocks[b].push(l);
        }
    }
    GraphSpec::new(ClusterPartition::new(blocks).unwrap(), j, ell, ell_minus).unwrap()
}

/// Random graph whose clusters balance their parities: a random
/// opposite-parity pairing with randomly merged pairs.
fn random_balanced_spec(rng: &mut ChaCha8Rng) -> GraphSpec {
    let (j, ell, ell_minus) = random_history(rng);
    let parities = initial_parities(&j, &ell, &ell_minus);
    let first = usize::from(!ell_minus.is_empty());
    let mut plus: Vec<usize> = Vec::new();
    let mut minus: Vec<usize> = Vec::new();
    for (i, &p) in parities.iter().enumerate() {
        if p > 0 { plus.push(first + i) } else { minus.push(first + i) }
    }
    for i in (1..minus.len()).rev() {
        let k = rng.random_range(0..=i);
        minus.swap(i, k);
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for (a, b) in plus.into_iter().zip(minus) {
        if !blocks.is_empty() && rng.random_bool(0.3) {
            let t = rng.random_range(0..blocks.len());
            blocks[t].extend([a, b]);
        } else {
            blocks.push(vec![a, b]);
        }
    }
    GraphSpec::new(ClusterPartition::new(blocks).unwrap(), j, ell, ell_minus).unwrap()
}

#[test]
fn cumulative_degree_bounds_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut relevant = 0;
    while relevant < 1000 {
        let spec = random_balanced_spec(&mut rng);
        let r = ResolvedGraph::build(&spec).unwrap();
        if !is_relevant(&r) {
            continue;
        }
        relevant += 1;
        let s = ClusterScheme::run(&spec);
        assert!(s.cumulative_bounds_hold(), "{spec:?} {s:?}");
        assert_eq!(s.degrees, r.degrees());
        assert_eq!(r.n_free(), 2 * spec.total() + 2 - spec.partition.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slice_phases_telescope(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng);
        let r = ResolvedGraph::build(&spec).unwrap();
        let n = spec.total();
        prop_assert!(r.slice_phase(n).is_zero());
        for j in 1..=n {
            prop_assert_eq!(r.slice_phase(j - 1).sub(&r.slice_phase(j)), r.interaction_phase(j));
        }
    }

    #[test]
    fn graph_build_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng);
        let a = classify_spec(&spec).unwrap();
        let b = classify_spec(&spec).unwrap();
        prop_assert_eq!(dump_graph(&a.0, &a.1), dump_graph(&b.0, &b.1));
        let g = MomentumGraph::build(&spec).unwrap();
        prop_assert_eq!(g.edges.len(), 5 * spec.total() + 5);
    }

    #[test]
    fn omega_vertex_reversal_identity(
        k1 in proptest::collection::vec(-0.5f64..0.5, 3),
        k2 in proptest::collection::vec(-0.5f64..0.5, 3),
        k3 in proptest::collection::vec(-0.5f64..0.5, 3),
        plus in any::<bool>(),
    ) {
        let disp = DispersionRelation::nearest_neighbor(3, 3.0);
        let sigma = if plus { 1 } else { -1 };
        let neg = |v: &Vec<f64>| v.iter().map(|x| -x).collect::<Vec<f64>>();
        let a = omega_vertex(&disp, [&k1, &k2, &k3], sigma).unwrap();
        let b = omega_vertex(&disp, [&neg(&k3), &neg(&k2), &neg(&k1)], -sigma).unwrap();
        prop_assert!((a + b).abs() < 1e-12);
    }
}

#[test]
fn constant_dispersion_has_no_interaction_phase() {
    let disp = DispersionRelation::tabulated(2, 1.5, 4, vec![1.5; 16], false).unwrap();
    let k = [0.25, 0.5];
    assert_eq!(omega_vertex(&disp, [&k, &k, &k], 1).unwrap(), 0.0);
}

#[test]
fn simplex_integrals_match_divided_differences() {
    let g = [c(0.2, -0.3), c(1.1, 0.0), c(-0.7, -0.1)];
    let s = simplex_integral(&g, 2.5, 1e-13).unwrap();
    assert!((s - simplex_integral_distinct(&g, 2.5)).norm() < 1e-11);
}

#[test]
fn interlacing_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut draw = |k: usize| -> Vec<Complex64> {
        (0..k).map(|_| c(rng.random_range(-2.0..2.0), -rng.random_range(0.0..0.5))).collect()
    };
    let gp = draw(1);
    let gm = draw(4);
    assert!(verify_interlacing_identity(&gp, &gm, 1.3).unwrap() <= 1e-10);
    let gp = draw(2);
    let gm = draw(2);
    assert!(verify_interlacing_identity(&gp, &gm, 1.7).unwrap() <= 1e-8);
    let gp = draw(3);
    let gm = draw(4);
    assert!(verify_interlacing_identity(&gp, &gm, 0.9).unwrap() <= 1e-8);

    // Equal phases: t^n/n!·t^{n′}/n′! against C(n+n′, n)·t^{n+n′}/(n+n′)!.
    let (n, nm, t) = (2usize, 3usize, 1.4f64);
    let z = c(0.0, 0.0);
    let lhs = t.powi(n as i32) / 2.0 * t.powi(nm as i32) / 6.0;
    let rhs = 10.0 * t.powi(5) / 120.0;
    assert!((lhs - rhs).abs() < 1e-12);
    assert!(verify_interlacing_identity(&vec![z; n + 1], &vec![z; nm + 1], t).unwrap() < 1e-10);
}

#[test]
fn resolvent_identity() {
    let cfg = ContourConfig { margin: 1.0, nodes: 4000 };
    let single = [c(0.4, -0.2)];
    assert!(verify_resolvent_identity(&single, &[0], 2.0, cfg).unwrap() <= 1e-8);

    let g = [c(0.5, -0.3), c(-1.0, -0.1), c(1.5, -0.6)];
    assert!(verify_resolvent_identity(&g, &[0, 2], 1.5, cfg).unwrap() <= 1e-6);
    assert!(verify_resolvent_identity(&g, &[0, 1, 2], 1.5, cfg).unwrap() <= 1e-6);

    let (lhs, rhs) = resolvent_sides(&g, &[1, 2], 0.0, cfg).unwrap();
    assert_eq!(lhs, c(0.0, 0.0));
    assert!(rhs.norm() < 1e-6);

    let tight = ContourConfig { margin: 1e-4, nodes: 4000 };
    assert!(verify_resolvent_identity(&g, &[0], 1.0, tight).is_err());
}
