//! Plain-text graph records: vertices with roles and time levels, edges in
//! creation order with parities and momentum expansions, the free edges and
//! the classification diagnostics.

use std::fmt::Write as _;

use super::classify::{GraphClass, LoopRelation, SliceKind};
use super::momentum::{ResolvedGraph, VertexKind};

fn vertex_label(kind: VertexKind) -> String {
    match kind {
        VertexKind::Root => "root".into(),
        VertexKind::Fusion(j) => format!("fusion {j}"),
        VertexKind::Initial(l) => format!("initial {l}"),
        VertexKind::Cluster(b) => format!("cluster {b}"),
    }
}

fn list<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Renders one graph record terminated by `end`.
pub fn dump_graph(r: &ResolvedGraph, class: &GraphClass) -> String {
    let g = &r.graph;
    let spec = &g.spec;
    let mut s = String::new();
    let j: Vec<String> = spec.interlacing.j.iter().map(|v| if *v > 0 { "+".into() } else { "-".into() }).collect();
    let _ = writeln!(
        s,
        "graph n={} n'={} ell=[{}] ell'=[{}] J=[{}] amputated={}",
        spec.n(),
        spec.n_minus(),
        list(&spec.ell),
        list(&spec.ell_minus),
        j.join(","),
        spec.amputated
    );
    let blocks: Vec<String> = spec.partition.blocks.iter().map(|b| format!("{{{}}}", list(b))).collect();
    let _ = writeln!(s, "partition {}", blocks.join(" "));
    for (i, v) in g.vertices.iter().enumerate() {
        let _ = writeln!(s, "vertex {i} {} tau={}", vertex_label(v.kind), v.tau);
    }
    for (i, e) in g.edges.iter().enumerate() {
        let parity = match e.parity {
            Some(p) if p > 0 => "+1",
            Some(_) => "-1",
            None => "0",
        };
        let role = if r.tree.in_tree[i] { "tree" } else { "free" };
        let _ = writeln!(s, "edge {i} {}->{} parity={parity} {role} k={}", e.from, e.to, r.momenta[i]);
    }
    let _ = writeln!(s, "free [{}]", list(&r.tree.free));
    let _ = writeln!(s, "class {}", class.kind.as_str());
    let _ = writeln!(s, "degrees [{}]", list(&class.degrees));
    let slices: Vec<&str> = class
        .slices
        .iter()
        .map(|k| match k {
            SliceKind::Long => "long",
            SliceKind::Short => "short",
            SliceKind::Amputated => "amputated",
        })
        .collect();
    let _ = writeln!(s, "slices [{}]", slices.join(","));
    let opt = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
    let _ = writeln!(s, "m0' {}", opt(class.m0_prime));
    for dl in &class.double_loops {
        let rel: Vec<String> = dl
            .relations
            .iter()
            .map(|(m, r)| {
                let t = match r {
                    LoopRelation::Independent => "independent",
                    LoopRelation::Nested => "nested",
                    LoopRelation::Crossing => "crossing",
                };
                format!("{m}:{t}")
            })
            .collect();
        let _ = writeln!(
            s,
            "loop v{} f1={} f2={} e3={} X={} T1=[{}] T2=[{}] T3=[{}] slices=[{}]",
            dl.vertex,
            dl.f1,
            dl.f2,
            dl.e3,
            dl.x.map_or("-".to_string(), |x| format!("v{x}")),
            list(&dl.t1),
            list(&dl.t2),
            list(&dl.t3),
            rel.join(",")
        );
    }
    let _ = writeln!(s, "deciding {}", opt(class.deciding_vertex));
    let _ = writeln!(s, "last-crossing-slice {}", opt(class.last_crossing_slice));
    s.push_str("end\n");
    s
}
