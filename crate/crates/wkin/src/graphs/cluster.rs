//! The iterative cluster scheme: lines of the initial time slice are merged
//! fusion by fusion, moving forward in time, and the number of distinct
//! clusters swallowed by each fusion determines its degree.

use serde::{Deserialize, Serialize};

use super::enumerate::ClusterPartition;
use super::momentum::{GraphSpec, UnionFind};

/// Per-step record of the cluster scheme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterScheme {
    /// `deg v_i` for `i = 1, …, N`.
    pub degrees: Vec<u8>,
    /// `|S^{(i)}|` for `i = 0, …, N`; entry `0` is `|S|`.
    pub cluster_counts: Vec<usize>,
}

impl ClusterScheme {
    /// Runs the scheme for the lines of `spec` clustered by `spec.partition`.
    pub fn run(spec: &GraphSpec) -> Self {
        Self::run_with(spec, &spec.partition)
    }

    /// Runs the scheme for the histories of `spec` with another partition
    /// of the same initial-time labels.
    pub fn run_with(spec: &GraphSpec, partition: &ClusterPartition) -> Self {
        let first = spec.first_label();
        let n_lines = 2 * spec.total() + 2;
        let n_minus_lines = 2 * spec.n_minus() + 1;
        // Union-find nodes: initial lines, then one node per fusion output.
        let mut uf = UnionFind::new(n_lines + spec.total());
        let block_of = partition.block_of(first + n_lines);
        let mut rep: Vec<Option<usize>> = vec![None; partition.len()];
        for pos in 0..n_lines {
            let b = block_of[first + pos].expect("partition covers the initial labels");
            match rep[b] {
                Some(r) => {
                    uf.union(pos, r);
                }
                None => rep[b] = Some(pos),
            }
        }
        let mut minus: Vec<usize> = (0..n_minus_lines).collect();
        let mut plus: Vec<usize> = (n_minus_lines..n_lines).collect();
        let mut count = partition.len();
        let mut degrees = Vec::with_capacity(spec.total());
        let mut cluster_counts = vec![count];
        let (mut ip, mut im) = (0, 0);
        for (i, &side) in spec.interlacing.j.iter().enumerate() {
            let (open, idx) = if side == 1 {
                ip += 1;
                (&mut plus, spec.ell[ip - 1] - 1)
            } else {
                im += 1;
                (&mut minus, spec.ell_minus[im - 1] - 1)
            };
            let kids = [open[idx], open[idx + 1], open[idx + 2]];
            let mut roots: Vec<usize> = kids.iter().map(|&x| uf.find(x)).collect();
            roots.sort_unstable();
            roots.dedup();
            let deg = (3 - roots.len()) as u8;
            let node = n_lines + i;
            for &k in &kids {
                uf.union(k, node);
            }
            open.splice(idx..idx + 3, [node]);
            count = count + deg as usize - 2;
            degrees.push(deg);
            cluster_counts.push(count);
        }
        Self { degrees, cluster_counts }
    }

    /// Number of vertices of degree `d` among `v_1, …, v_i`.
    pub fn count_upto(&self, d: u8, i: usize) -> usize {
        self.degrees[..i].iter().filter(|&&x| x == d).count()
    }

    /// `r = N + 1 − |S|`.
    pub fn r(&self) -> isize {
        self.degrees.len() as isize + 1 - self.cluster_counts[0] as isize
    }

    /// Checks the cumulative degree bounds `n₂(i) ≤ r + n₀(i)` and
    /// `2 n₀(i) ≥ i − n₁ − r` for every `i`.
    pub fn cumulative_bounds_hold(&self) -> bool {
        let r = self.r();
        let n1 = self.count_upto(1, self.degrees.len()) as isize;
        (1..=self.degrees.len()).all(|i| {
            let n0 = self.count_upto(0, i) as isize;
            let n2 = self.count_upto(2, i) as isize;
            n2 <= r + n0 && 2 * n0 >= i as isize - n1 - r
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::momentum::ResolvedGraph;

    fn pairs(p: &[[usize; 2]]) -> ClusterPartition {
        ClusterPartition::new(p.iter().map(|b| b.to_vec()).collect()).unwrap()
    }

    #[test]
    fn leading_example_degrees() {
        let spec = GraphSpec::main_term(vec![2, 1], pairs(&[[0, 4], [1, 3], [2, 5]])).unwrap();
        let s = ClusterScheme::run(&spec);
        assert_eq!(s.degrees, vec![0, 2]);
        assert_eq!(s.cluster_counts, vec![3, 1, 1]);
        assert_eq!(s.degrees, ResolvedGraph::build(&spec).unwrap().degrees());
        assert!(s.cumulative_bounds_hold());
    }

    #[test]
    fn single_cluster_gives_maximal_degrees() {
        let all = ClusterPartition::new(vec![(0..6).collect()]).unwrap();
        let spec = GraphSpec::main_term(vec![1, 1], all).unwrap();
        let s = ClusterScheme::run(&spec);
        assert_eq!(s.degrees, vec![2, 2]);
        assert_eq!(s.cluster_counts, vec![1, 1, 1]);
    }
}
