use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest arity accepted by enumeration and cumulant evaluation (Bell(10) = 115975).
pub const MAX_ARITY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lattice {
    /// All set partitions, P(n).
    All,
    /// Non-crossing partitions, NC(n).
    NonCrossing,
}

/// A set partition of {1..n}; blocks are sorted and ordered by their minimum.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Canonicalizes the blocks; they must cover {1..n} exactly once.
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.retain(|b| !b.is_empty());
        blocks.sort_by_key(|b| b[0]);
        let n = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; n + 1];
        for &e in blocks.iter().flatten() {
            if e == 0 || e > n || seen[e] {
                return Err(Error::InvalidArgument(format!("blocks do not partition {{1..{n}}}")));
            }
            seen[e] = true;
        }
        Ok(Self { n, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block `i` as a bitmask over 0-based slots.
    pub fn block_mask(&self, i: usize) -> u32 {
        self.blocks[i].iter().fold(0, |m, &e| m | 1 << (e - 1))
    }

    /// No i < j < k < l with i, k in one block and j, l in another.
    pub fn is_noncrossing(&self) -> bool {
        let mut label = vec![0usize; self.n + 1];
        for (b, block) in self.blocks.iter().enumerate() {
            for &e in block {
                label[e] = b;
            }
        }
        // A crossing exists iff two blocks interleave; check every pair of consecutive elements.
        for (b, block) in self.blocks.iter().enumerate() {
            for w in block.windows(2) {
                let inside: Vec<usize> = (w[0] + 1..w[1]).map(|e| label[e]).filter(|&l| l != b).collect();
                for &l in &inside {
                    if self.blocks[l].iter().any(|&e| e < w[0] || e > w[1]) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

impl TryFrom<Vec<Vec<usize>>> for Partition {
    type Error = Error;

    fn try_from(blocks: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(blocks)
    }
}

impl From<Partition> for Vec<Vec<usize>> {
    fn from(p: Partition) -> Self {
        p.blocks
    }
}

/// μ(π, 1̂) = (−1)^{|π|−1} (|π|−1)! on the lattice of all partitions.
pub fn mobius_to_top(pi: &Partition) -> i64 {
    let k = pi.len() as i64;
    let fact: i64 = (1..k).product();
    if k % 2 == 1 {
        fact
    } else {
        -fact
    }
}

pub fn check_arity(n: usize) -> Result<()> {
    if n > MAX_ARITY {
        return Err(Error::ArityTooLarge { n, cap: MAX_ARITY });
    }
    Ok(())
}

/// All partitions of {1..n} of the given kind, in deterministic canonical order.
pub fn enumerate(n: usize, kind: Lattice) -> Result<Vec<Partition>> {
    check_arity(n)?;
    if n == 0 {
        return Err(Error::InvalidArgument("arity must be at least 1".into()));
    }
    let elems: Vec<usize> = (1..=n).collect();
    let raw = match kind {
        Lattice::All => all_of(&elems),
        Lattice::NonCrossing => noncrossing_of(&elems),
    };
    Ok(raw.into_iter().map(|mut blocks| {
        blocks.sort_by_key(|b| b[0]);
        Partition { n, blocks }
    })
    .collect())
}

// The block V containing the smallest element, times a partition of the rest.
fn all_of(elems: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let Some((&first, rest)) = elems.split_first() else {
        return vec![vec![]];
    };
    let mut out = Vec::new();
    for sub in 0u32..1 << rest.len() {
        let mut v = vec![first];
        let mut remaining = Vec::new();
        for (i, &e) in rest.iter().enumerate() {
            if sub >> i & 1 == 1 {
                v.push(e);
            } else {
                remaining.push(e);
            }
        }
        for mut p in all_of(&remaining) {
            p.insert(0, v.clone());
            out.push(p);
        }
    }
    out
}

// As above, but blocks may not straddle an element of V: each gap is partitioned on its own.
fn noncrossing_of(elems: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let Some((&first, rest)) = elems.split_first() else {
        return vec![vec![]];
    };
    let mut out = Vec::new();
    for sub in 0u32..1 << rest.len() {
        let mut v = vec![first];
        let mut gaps: Vec<Vec<usize>> = vec![Vec::new()];
        for (i, &e) in rest.iter().enumerate() {
            if sub >> i & 1 == 1 {
                v.push(e);
                gaps.push(Vec::new());
            } else {
                gaps.last_mut().expect("nonempty").push(e);
            }
        }
        let mut acc: Vec<Vec<Vec<usize>>> = vec![vec![v]];
        for gap in gaps.iter().filter(|g| !g.is_empty()) {
            let parts = noncrossing_of(gap);
            acc = acc
                .into_iter()
                .flat_map(|a| {
                    parts.iter().map(move |p| {
                        let mut q = a.clone();
                        q.extend(p.iter().cloned());
                        q
                    })
                })
                .collect();
        }
        out.extend(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // Restricted growth strings: a[0] = 0, a[i] ≤ 1 + max(a[..i]).
    fn brute_force(n: usize) -> Vec<Partition> {
        let mut out = Vec::new();
        let mut a = vec![0usize; n];
        loop {
            let k = a.iter().max().unwrap() + 1;
            let blocks: Vec<Vec<usize>> =
                (0..k).map(|b| (0..n).filter(|&i| a[i] == b).map(|i| i + 1).collect()).collect();
            out.push(Partition::new(blocks).unwrap());
            let mut i = n - 1;
            loop {
                if i == 0 {
                    return out;
                }
                let m = a[..i].iter().max().copied().unwrap();
                if a[i] <= m {
                    a[i] += 1;
                    a[i + 1..].iter_mut().for_each(|x| *x = 0);
                    break;
                }
                i -= 1;
            }
        }
    }

    fn crosses_by_quadruples(p: &Partition) -> bool {
        let n = p.n();
        let mut label = vec![0; n + 1];
        for (b, bl) in p.blocks().iter().enumerate() {
            for &e in bl {
                label[e] = b;
            }
        }
        for i in 1..=n {
            for j in i + 1..=n {
                for k in j + 1..=n {
                    for l in k + 1..=n {
                        if label[i] == label[k] && label[j] == label[l] && label[i] != label[j] {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    #[test]
    fn counts_match_bell_and_catalan() {
        let bell = [1usize, 1, 2, 5, 15, 52, 203, 877, 4140];
        let catalan = [1usize, 1, 2, 5, 14, 42, 132, 429, 1430];
        for n in 1..=8 {
            let all = enumerate(n, Lattice::All).unwrap();
            let nc = enumerate(n, Lattice::NonCrossing).unwrap();
            assert_eq!(all.len(), bell[n]);
            assert_eq!(nc.len(), catalan[n]);
            let mut a = all.clone();
            let mut b = brute_force(n);
            a.sort();
            b.sort();
            assert_eq!(a, b);
            let mut expect_nc: Vec<_> = b.into_iter().filter(|p| !crosses_by_quadruples(p)).collect();
            let mut got_nc = nc.clone();
            expect_nc.sort();
            got_nc.sort();
            assert_eq!(got_nc, expect_nc);
            for p in &all {
                assert_eq!(p.is_noncrossing(), !crosses_by_quadruples(p));
            }
        }
    }

    #[test]
    fn single_crossing_partition_of_four() {
        let all = enumerate(4, Lattice::All).unwrap();
        let crossing: Vec<_> = all.iter().filter(|p| !p.is_noncrossing()).collect();
        assert_eq!(crossing.len(), 1);
        assert_eq!(crossing[0].blocks(), &[vec![1, 3], vec![2, 4]]);
    }

    #[test]
    fn mobius_values() {
        let p = |b: Vec<Vec<usize>>| Partition::new(b).unwrap();
        assert_eq!(mobius_to_top(&p(vec![vec![1, 2, 3]])), 1);
        assert_eq!(mobius_to_top(&p(vec![vec![1], vec![2, 3]])), -1);
        assert_eq!(mobius_to_top(&p(vec![vec![1], vec![2], vec![3]])), 2);
        assert_eq!(mobius_to_top(&p(vec![vec![1], vec![2], vec![3], vec![4]])), -6);
    }

    #[test]
    fn arity_cap_and_json() {
        assert!(matches!(enumerate(11, Lattice::All), Err(Error::ArityTooLarge { n: 11, cap: 10 })));
        assert_eq!(enumerate(1, Lattice::NonCrossing).unwrap().len(), 1);
        let p = Partition::new(vec![vec![3, 1], vec![2]]).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "[[1,3],[2]]");
        assert!(Partition::new(vec![vec![1, 1]]).is_err());
    }
}
