//! Interaction histories, interlacings and cluster partitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of histories produced by one enumeration; equals
/// `|G_8| = 15!!` for single-line trees.
pub const MAX_HISTORIES: u64 = 2_027_025;
/// Largest `n + n′` accepted by [`enumerate_interlacings`].
pub const MAX_INTERLACED: usize = 16;
/// Largest index set accepted for unrestricted partitions.
pub const MAX_PARTITION_SET: usize = 12;
/// Largest index set accepted for perfect matchings.
pub const MAX_PAIRING_SET: usize = 16;

/// `(2n−1)!!`, with `(−1)!! = 1`.
pub fn double_factorial_odd(n: usize) -> u64 {
    (1..=n as u64).map(|j| 2 * j - 1).product()
}

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k as u64).fold(1u64, |acc, i| acc * (n as u64 - i) / (i + 1))
}

/// A sequence of fusion positions `ℓ = (ℓ₁, …, ℓ_n)`.  Fusion `i` joins the
/// lines `ℓ_i, ℓ_i+1, ℓ_i+2` of slice `i−1` into line `ℓ_i` of slice `i`, so
/// that `ℓ_i ∈ {1, …, m_{n−i}}` with `m_j = m₀ + 2j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InteractionHistory {
    pub m0: usize,
    pub ell: Vec<usize>,
}

impl InteractionHistory {
    pub fn new(m0: usize, ell: Vec<usize>) -> Result<Self> {
        let h = Self { m0, ell };
        h.validate()?;
        Ok(h)
    }

    pub fn n(&self) -> usize {
        self.ell.len()
    }

    /// Number of lines `m_j = m₀ + 2j` on the slice `n − j`.
    pub fn lines(m0: usize, j: usize) -> usize {
        m0 + 2 * j
    }

    pub fn validate(&self) -> Result<()> {
        if self.m0 == 0 {
            return Err(Error::InvalidInput("m0 must be at least 1".into()));
        }
        let n = self.n();
        for (i, &l) in self.ell.iter().enumerate() {
            let range = Self::lines(self.m0, n - 1 - i);
            if l == 0 || l > range {
                return Err(Error::InvalidInput(format!("ℓ_{} = {l} outside 1..={range}", i + 1)));
            }
        }
        Ok(())
    }
}

/// `|G_n| = ∏_{j<n} (m₀ + 2j)`.
pub fn history_count(n: usize, m0: usize) -> u64 {
    (0..n).map(|j| (m0 + 2 * j) as u64).product()
}

/// All histories of length `n` in lexicographic order of `ℓ`.
pub fn enumerate_histories(n: usize, m0: usize) -> Result<Vec<InteractionHistory>> {
    if m0 == 0 {
        return Err(Error::InvalidInput("m0 must be at least 1".into()));
    }
    let count = (0..n).try_fold(1u64, |acc, j| acc.checked_mul((m0 + 2 * j) as u64));
    match count {
        Some(c) if c <= MAX_HISTORIES => {}
        _ => {
            return Err(Error::Guard(format!(
                "history enumeration for n = {n}, m0 = {m0} exceeds {MAX_HISTORIES} entries"
            )))
        }
    }
    let ranges: Vec<usize> = (0..n).map(|i| InteractionHistory::lines(m0, n - 1 - i)).collect();
    let mut out = Vec::with_capacity(count.unwrap_or(0) as usize);
    let mut cur = vec![1usize; n];
    loop {
        out.push(InteractionHistory { m0, ell: cur.clone() });
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            if cur[pos] < ranges[pos] {
                cur[pos] += 1;
                cur[pos + 1..].iter_mut().for_each(|v| *v = 1);
                break;
            }
        }
    }
}

/// A map `J: {1, …, n+n′} → {±1}` taking the value `+1` exactly `n` times.
/// Entry `i−1` is the tree of the `i`-th interaction counted from the
/// initial time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interlacing {
    pub j: Vec<i8>,
}

impl Interlacing {
    pub fn new(j: Vec<i8>) -> Result<Self> {
        if j.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidInput("interlacing values must be ±1".into()));
        }
        Ok(Self { j })
    }

    /// The map that is `+1` everywhere.
    pub fn all_plus(n: usize) -> Self {
        Self { j: vec![1; n] }
    }

    pub fn len(&self) -> usize {
        self.j.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j.is_empty()
    }

    pub fn n_plus(&self) -> usize {
        self.j.iter().filter(|&&s| s == 1).count()
    }

    pub fn n_minus(&self) -> usize {
        self.len() - self.n_plus()
    }

    /// `J_σ(i) = #{j ≤ i : J(j) = σ}` for `0 ≤ i ≤ n+n′`.
    pub fn prefix(&self, sigma: i8, i: usize) -> usize {
        self.j[..i].iter().filter(|&&s| s == sigma).count()
    }
}

/// All maps interlacing `(n, n′)`, ordered lexicographically with `+1`
/// preceding `−1`.
pub fn enumerate_interlacings(n: usize, n_minus: usize) -> Result<Vec<Interlacing>> {
    let total = n + n_minus;
    if total > MAX_INTERLACED {
        return Err(Error::Guard(format!("n + n′ = {total} exceeds {MAX_INTERLACED}")));
    }
    let mut out = Vec::with_capacity(binomial(total, n) as usize);
    let mut cur = Vec::with_capacity(total);
    fn rec(out: &mut Vec<Interlacing>, cur: &mut Vec<i8>, plus: usize, minus: usize) {
        if plus == 0 && minus == 0 {
            out.push(Interlacing { j: cur.clone() });
            return;
        }
        if plus > 0 {
            cur.push(1);
            rec(out, cur, plus - 1, minus);
            cur.pop();
        }
        if minus > 0 {
            cur.push(-1);
            rec(out, cur, plus, minus - 1);
            cur.pop();
        }
    }
    rec(&mut out, &mut cur, n, n_minus);
    Ok(out)
}

/// A partition of an index set into non-empty blocks, stored canonically:
/// each block sorted, blocks ordered by their smallest element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusterPartition {
    pub blocks: Vec<Vec<usize>>,
}

impl ClusterPartition {
    /// Builds a partition and checks that the blocks are non-empty and
    /// disjoint.  Block order is kept as given.
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::InvalidInput("empty cluster".into()));
            }
            for &i in b {
                if !seen.insert(i) {
                    return Err(Error::InvalidInput(format!("index {i} appears in two clusters")));
                }
            }
        }
        Ok(Self { blocks })
    }

    /// Sorted blocks in order of their smallest element.
    pub fn canonical(&self) -> Self {
        let mut blocks: Vec<Vec<usize>> = self
            .blocks
            .iter()
            .map(|b| {
                let mut b = b.clone();
                b.sort_unstable();
                b
            })
            .collect();
        blocks.sort();
        Self { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Whether every block has exactly two elements.
    pub fn is_pairing(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 2)
    }

    /// Whether some block has an odd number of elements.
    pub fn has_odd_block(&self) -> bool {
        self.blocks.iter().any(|b| b.len() % 2 == 1)
    }

    /// Whether the union of the blocks is exactly `indices`.
    pub fn covers(&self, indices: &[usize]) -> bool {
        let mut all: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        let mut want = indices.to_vec();
        want.sort_unstable();
        all == want
    }

    /// Block index of each element, for elements in `0..size`.
    pub fn block_of(&self, size: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; size];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                if i < size {
                    out[i] = Some(b);
                }
            }
        }
        out
    }
}

/// All partitions of `indices` (Bell-number many) or, with
/// `pairings_only`, all perfect matchings (`(|I|−1)!!` many).  The order is
/// that of restricted-growth strings over the given index order.
pub fn enumerate_partitions(indices: &[usize], pairings_only: bool) -> Result<Vec<ClusterPartition>> {
    let n = indices.len();
    let limit = if pairings_only { MAX_PAIRING_SET } else { MAX_PARTITION_SET };
    if n > limit {
        return Err(Error::Guard(format!("index set of size {n} exceeds {limit}")));
    }
    if n == 0 {
        return Ok(vec![ClusterPartition { blocks: Vec::new() }]);
    }
    let mut out = Vec::new();
    if pairings_only {
        if n % 2 == 1 {
            return Ok(out);
        }
        let mut used = vec![false; n];
        let mut blocks = Vec::new();
        pair_rec(indices, &mut used, &mut blocks, &mut out);
        return Ok(out);
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    part_rec(indices, 0, &mut blocks, &mut out);
    Ok(out)
}

fn pair_rec(indices: &[usize], used: &mut [bool], blocks: &mut Vec<Vec<usize>>, out: &mut Vec<ClusterPartition>) {
    let Some(first) = used.iter().position(|u| !u) else {
        out.push(ClusterPartition { blocks: blocks.clone() });
        return;
    };
    used[first] = true;
    for j in first + 1..indices.len() {
        if !used[j] {
            used[j] = true;
            blocks.push(vec![indices[first], indices[j]]);
            pair_rec(indices, used, blocks, out);
            blocks.pop();
            used[j] = false;
        }
    }
    used[first] = false;
}

fn part_rec(indices: &[usize], pos: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<ClusterPartition>) {
    if pos == indices.len() {
        out.push(ClusterPartition { blocks: blocks.clone() });
        return;
    }
    for b in 0..blocks.len() {
        blocks[b].push(indices[pos]);
        part_rec(indices, pos + 1, blocks, out);
        blocks[b].pop();
    }
    blocks.push(vec![indices[pos]]);
    part_rec(indices, pos + 1, blocks, out);
    blocks.pop();
}

/// Perfect matchings of `labels` in which every pair joins a `+1` and a
/// `−1` entry of `parities`.  Returns an empty list when the parities are
/// unbalanced.
pub fn opposite_parity_pairings(labels: &[usize], parities: &[i8]) -> Vec<ClusterPartition> {
    let plus: Vec<usize> = labels.iter().zip(parities).filter(|(_, &s)| s == 1).map(|(&l, _)| l).collect();
    let minus: Vec<usize> = labels.iter().zip(parities).filter(|(_, &s)| s == -1).map(|(&l, _)| l).collect();
    if plus.len() != minus.len() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut used = vec![false; minus.len()];
    let mut blocks = Vec::with_capacity(plus.len());
    fn rec(
        plus: &[usize],
        minus: &[usize],
        i: usize,
        used: &mut [bool],
        blocks: &mut Vec<Vec<usize>>,
        out: &mut Vec<ClusterPartition>,
    ) {
        if i == plus.len() {
            out.push(ClusterPartition { blocks: blocks.clone() }.canonical());
            return;
        }
        for j in 0..minus.len() {
            if !used[j] {
                used[j] = true;
                blocks.push(vec![plus[i], minus[j]]);
                rec(plus, minus, i + 1, used, blocks, out);
                blocks.pop();
                used[j] = false;
            }
        }
    }
    rec(&plus, &minus, 0, &mut used, &mut blocks, &mut out);
    out
}
