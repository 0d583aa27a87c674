//! Set partitions of `{1..n}`, the ε-admissible subfamily (every block with
//! more than one element consists of ε = 1 indices), labeled index sets for
//! products of powers of integrals, and the block maps that expand a k-tuple
//! into an n-tuple.
//!
//! Partitions are stored as restricted-growth strings and enumerated in
//! lexicographic order of those strings; blocks are ordered by their minimum
//! element. Internally indices are 0-based, and they are printed 1-based.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use smallvec::SmallVec;

use crate::configurations::EpsilonVector;
use crate::error::{Error, Result};
use crate::space_measure::Point;

/// Largest supported ground set (Bell(12) = 4 213 597).
pub const MAX_PARTITION_SIZE: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    /// `labels[i]` is the block of element `i`.
    labels: SmallVec<[u8; 12]>,
    blocks: usize,
}

impl Partition {
    fn from_rgs(labels: &[u8]) -> Self {
        let blocks = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        Self {
            labels: SmallVec::from_slice(labels),
            blocks,
        }
    }

    /// Builds a partition from 0-based blocks in any order.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut owner = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidParameter("empty block".into()));
            }
            for &i in block {
                if i >= n || owner[i] != usize::MAX {
                    return Err(Error::InvalidParameter(format!("element {i} repeated or out of range")));
                }
                owner[i] = b;
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(Error::InvalidParameter("blocks do not cover the ground set".into()));
        }
        // relabel in order of first appearance
        let mut map = vec![u8::MAX; blocks.len()];
        let mut next = 0u8;
        let labels: Vec<u8> = owner
            .iter()
            .map(|&b| {
                if map[b] == u8::MAX {
                    map[b] = next;
                    next += 1;
                }
                map[b]
            })
            .collect();
        Ok(Self::from_rgs(&labels))
    }

    pub fn singletons(n: usize) -> Self {
        let labels: Vec<u8> = (0..n as u8).collect();
        Self::from_rgs(&labels)
    }

    /// Size of the ground set.
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Number of blocks.
    pub fn k(&self) -> usize {
        self.blocks
    }

    pub fn label_of(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// 0-based blocks in canonical order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.blocks];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.blocks];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Block sizes in decreasing order joined by '+', e.g. "2+1+1".
    pub fn type_signature(&self) -> String {
        let mut sizes = self.block_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("+")
    }

    /// Whether every block with more than one element has ε = 1 throughout.
    pub fn is_admissible(&self, epsilon: &EpsilonVector) -> bool {
        let sizes = self.block_sizes();
        self.labels
            .iter()
            .enumerate()
            .all(|(i, &l)| epsilon.get(i) || sizes[l as usize] == 1)
    }

    /// ε restricted to blocks; errors if ε is not constant on some block.
    pub fn block_epsilon(&self, epsilon: &EpsilonVector) -> Result<Vec<bool>> {
        if epsilon.len() != self.n() {
            return Err(Error::ArityMismatch {
                expected: self.n(),
                got: epsilon.len(),
            });
        }
        let mut out: Vec<Option<bool>> = vec![None; self.blocks];
        for (i, &l) in self.labels.iter().enumerate() {
            let e = epsilon.get(i);
            match out[l as usize] {
                None => out[l as usize] = Some(e),
                Some(prev) if prev != e => {
                    return Err(Error::EpsilonNotConstant {
                        block: self.blocks()[l as usize].iter().map(|i| i + 1).collect(),
                    })
                }
                _ => {}
            }
        }
        Ok(out.into_iter().map(|e| e.unwrap_or(false)).collect())
    }

    /// Writes `y^{[P]}` into `out`: element i receives the point of its block.
    pub fn expand_into(&self, y: &[Point], out: &mut Vec<Point>) {
        out.clear();
        out.extend(self.labels.iter().map(|&l| y[l as usize].clone()));
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (b, block) in self.blocks().iter().enumerate() {
            if b > 0 {
                f.write_str(",")?;
            }
            f.write_str("{")?;
            for (j, i) in block.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}", i + 1)?;
            }
            f.write_str("}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let blocks: Vec<Vec<usize>> = self
            .blocks()
            .into_iter()
            .map(|b| b.into_iter().map(|i| i + 1).collect())
            .collect();
        let mut st = s.serialize_struct("Partition", 2)?;
        st.serialize_field("blocks", &blocks)?;
        st.serialize_field("type", &self.type_signature())?;
        st.end()
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_PARTITION_SIZE {
        Err(Error::PartitionSize {
            n,
            max: MAX_PARTITION_SIZE,
        })
    } else {
        Ok(())
    }
}

/// Visits the ε-admissible partitions of `{0..n}` in lexicographic order of
/// their restricted-growth strings. `epsilon = None` admits every partition.
pub fn for_each_partition<F: FnMut(&Partition)>(n: usize, epsilon: Option<&EpsilonVector>, mut visit: F) -> Result<()> {
    check_size(n)?;
    if let Some(e) = epsilon {
        if e.len() != n {
            return Err(Error::ArityMismatch {
                expected: n,
                got: e.len(),
            });
        }
    }
    let ones = |i: usize| epsilon.is_none_or(|e| e.get(i));
    // `open[b]`: block b may still receive elements (all its members have ε = 1).
    let mut labels = vec![0u8; n];
    let mut open = vec![false; n];
    fn recurse<F: FnMut(&Partition)>(
        i: usize,
        blocks: usize,
        labels: &mut Vec<u8>,
        open: &mut Vec<bool>,
        ones: &dyn Fn(usize) -> bool,
        visit: &mut F,
    ) {
        let n = labels.len();
        if i == n {
            visit(&Partition::from_rgs(labels));
            return;
        }
        if ones(i) {
            for b in 0..blocks {
                if open[b] {
                    labels[i] = b as u8;
                    recurse(i + 1, blocks, labels, open, ones, visit);
                }
            }
        }
        labels[i] = blocks as u8;
        open[blocks] = ones(i);
        recurse(i + 1, blocks + 1, labels, open, ones, visit);
    }
    recurse(0, 0, &mut labels, &mut open, &ones, &mut visit);
    Ok(())
}

/// All partitions of `{1..n}`, `1 ≤ n ≤ 12`.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>> {
    let mut out = Vec::new();
    for_each_partition(n, None, |p| out.push(p.clone()))?;
    Ok(out)
}

/// Partitions whose blocks of size > 1 contain only ε = 1 indices.
pub fn enumerate_epsilon_partitions(n: usize, epsilon: &EpsilonVector) -> Result<Vec<Partition>> {
    let mut out = Vec::new();
    for_each_partition(n, Some(epsilon), |p| out.push(p.clone()))?;
    Ok(out)
}

pub fn count_epsilon_partitions(n: usize, epsilon: &EpsilonVector) -> Result<u64> {
    let mut count = 0u64;
    for_each_partition(n, Some(epsilon), |_| count += 1)?;
    Ok(count)
}

/// Number of partitions of each type (block-size signature).
pub fn type_multiplicities(partitions: &[Partition]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for p in partitions {
        *out.entry(p.type_signature()).or_insert(0) += 1;
    }
    out
}

/// Bell number via the Bell triangle.
pub fn bell_number(n: usize) -> u128 {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

/// Result of applying a partition to a k-tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMaps {
    /// `y^{[P]}`, length n.
    pub expanded: Vec<Point>,
    /// `ε^{[P]}`, length k.
    pub block_epsilon: EpsilonVector,
    /// `{y_i : ε_i^{[P]} = 1}`.
    pub augmentation: Vec<Point>,
}

pub fn block_maps(partition: &Partition, y: &[Point], epsilon: &EpsilonVector) -> Result<BlockMaps> {
    if y.len() != partition.k() {
        return Err(Error::ArityMismatch {
            expected: partition.k(),
            got: y.len(),
        });
    }
    let block_epsilon = partition.block_epsilon(epsilon)?;
    let mut expanded = Vec::new();
    partition.expand_into(y, &mut expanded);
    let augmentation = y
        .iter()
        .zip(&block_epsilon)
        .filter(|(_, e)| **e)
        .map(|(p, _)| p.clone())
        .collect();
    Ok(BlockMaps {
        expanded,
        block_epsilon: EpsilonVector::new(block_epsilon)?,
        augmentation,
    })
}

/// The labeled set `S = {(α, β, γ)}` for factors with arities `r_α` and
/// powers `n_α`, flattened with α slowest, then γ, then β. Each group
/// `S_{α,γ}` (one copy of factor α) is therefore a contiguous range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabeledIndex {
    /// `(r_α, n_α)` per factor.
    factors: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    len: usize,
}

/// One element `(α, β, γ)` of the labeled set, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LabeledTriple {
    pub alpha: usize,
    pub beta: usize,
    pub gamma: usize,
}

impl LabeledIndex {
    pub fn new(factors: Vec<(usize, usize)>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(factors.len());
        let mut len = 0usize;
        for &(r, n) in &factors {
            if n == 0 {
                return Err(Error::InvalidParameter("factor powers must be at least 1".into()));
            }
            offsets.push(len);
            len += r * n;
        }
        Ok(Self { factors, offsets, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn factors(&self) -> &[(usize, usize)] {
        &self.factors
    }

    pub fn flat_index(&self, t: LabeledTriple) -> usize {
        let (r, _) = self.factors[t.alpha];
        self.offsets[t.alpha] + t.gamma * r + t.beta
    }

    pub fn triple(&self, flat: usize) -> LabeledTriple {
        let alpha = self.offsets.partition_point(|&o| o <= flat) - 1;
        let (r, _) = self.factors[alpha];
        let local = flat - self.offsets[alpha];
        LabeledTriple {
            alpha,
            beta: local % r,
            gamma: local / r,
        }
    }

    /// `(α, γ, S_{α,γ})` for every copy of every factor, in flattening order.
    pub fn groups(&self) -> Vec<(usize, usize, Range<usize>)> {
        let mut out = Vec::new();
        for (alpha, &(r, n)) in self.factors.iter().enumerate() {
            for gamma in 0..n {
                let start = self.offsets[alpha] + gamma * r;
                out.push((alpha, gamma, start..start + r));
            }
        }
        out
    }

    /// ε on S: `ε_{(α,β,γ)} = ε_(α)[β]`.
    pub fn flatten_epsilon(&self, per_factor: &[EpsilonVector]) -> Result<EpsilonVector> {
        if per_factor.len() != self.factors.len() {
            return Err(Error::ArityMismatch {
                expected: self.factors.len(),
                got: per_factor.len(),
            });
        }
        let mut out = Vec::with_capacity(self.len);
        for (&(r, n), e) in self.factors.iter().zip(per_factor) {
            if e.len() != r {
                return Err(Error::ArityMismatch {
                    expected: r,
                    got: e.len(),
                });
            }
            for _ in 0..n {
                out.extend_from_slice(e.entries());
            }
        }
        EpsilonVector::new(out)
    }
}

/// Admissible partitions of the labeled set, over its flattened indices.
pub fn enumerate_labeled_partitions(index: &LabeledIndex, per_factor: &[EpsilonVector]) -> Result<Vec<Partition>> {
    let eps = index.flatten_epsilon(per_factor)?;
    enumerate_epsilon_partitions(index.len(), &eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eps(s: &str) -> EpsilonVector {
        s.parse().unwrap()
    }

    fn pt(x: f64) -> Point {
        Point::from_slice(&[x])
    }

    /// Independent oracle: `B_{n+1} = Σ_k C(n,k) B_k`.
    fn bell_by_binomial(n: usize) -> u128 {
        let mut b = vec![1u128];
        for m in 0..n {
            let mut c = 1u128;
            let mut s = 0u128;
            for (k, bk) in b.iter().enumerate() {
                s += c * bk;
                c = c * (m - k) as u128 / (k + 1) as u128;
            }
            b.push(s);
        }
        b[n]
    }

    #[test]
    fn small_enumerations() {
        let p1 = enumerate_partitions(1).unwrap();
        assert_eq!(p1.len(), 1);
        assert_eq!(p1[0].to_string(), "{{1}}");
        let p4 = enumerate_partitions(4).unwrap();
        assert_eq!(p4.len(), 15);
        let types = type_multiplicities(&p4);
        assert_eq!(types["4"], 1);
        assert_eq!(types["3+1"], 4);
        assert_eq!(types["2+2"], 3);
        assert_eq!(types["2+1+1"], 6);
        assert_eq!(types["1+1+1+1"], 1);
        assert_eq!(enumerate_partitions(6).unwrap().len(), 203);
        assert!(enumerate_partitions(0).is_err());
        assert!(enumerate_partitions(13).is_err());
    }

    #[test]
    fn canonical_order() {
        let p3: Vec<String> = enumerate_partitions(3).unwrap().iter().map(|p| p.to_string()).collect();
        assert_eq!(
            p3,
            ["{{1,2,3}}", "{{1,2},{3}}", "{{1,3},{2}}", "{{1},{2,3}}", "{{1},{2},{3}}"]
        );
    }

    #[test]
    fn bell_numbers_match_recurrence() {
        for n in 0..=25 {
            assert_eq!(bell_number(n), bell_by_binomial(n));
        }
        for n in 1..=10 {
            let mut count = 0u128;
            for_each_partition(n, None, |_| count += 1).unwrap();
            assert_eq!(count, bell_by_binomial(n), "n = {n}");
        }
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(
            enumerate_epsilon_partitions(4, &eps("1111")).unwrap(),
            enumerate_partitions(4).unwrap()
        );
        for n in 1..=6 {
            let z = enumerate_epsilon_partitions(n, &EpsilonVector::zeros(n).unwrap()).unwrap();
            assert_eq!(z, vec![Partition::singletons(n)]);
        }
        let p: Vec<String> = enumerate_epsilon_partitions(3, &eps("110"))
            .unwrap()
            .iter()
            .map(|p| p.to_string())
            .collect();
        assert_eq!(p, ["{{1,2},{3}}", "{{1},{2},{3}}"]);
        assert!(enumerate_epsilon_partitions(3, &eps("11")).is_err());
    }

    #[test]
    fn exhaustive_complement_check() {
        for n in 1..=6 {
            let all = enumerate_partitions(n).unwrap();
            for bits in 0..(1u32 << n) {
                let e = EpsilonVector::new((0..n).map(|i| bits >> i & 1 == 1).collect()).unwrap();
                let admissible = enumerate_epsilon_partitions(n, &e).unwrap();
                let filtered: Vec<Partition> = all.iter().filter(|p| p.is_admissible(&e)).cloned().collect();
                assert_eq!(admissible, filtered, "n = {n}, ε = {e}");
                for p in &admissible {
                    assert!(p.block_epsilon(&e).is_ok());
                }
            }
        }
    }

    #[test]
    fn block_map_examples() {
        let (a, b, c) = (pt(0.1), pt(0.2), pt(0.3));
        let p = Partition::from_blocks(3, &[vec![0, 1], vec![2]]).unwrap();
        let m = block_maps(&p, &[a.clone(), b.clone()], &eps("111")).unwrap();
        assert_eq!(m.expanded, vec![a.clone(), a.clone(), b.clone()]);
        assert_eq!(m.block_epsilon, eps("11"));
        assert_eq!(m.augmentation, vec![a.clone(), b.clone()]);

        let s = Partition::singletons(3);
        let m = block_maps(&s, &[a.clone(), b.clone(), c.clone()], &eps("000")).unwrap();
        assert_eq!(m.expanded, vec![a.clone(), b.clone(), c]);
        assert!(m.augmentation.is_empty());

        let p = Partition::from_blocks(3, &[vec![0, 2], vec![1]]).unwrap();
        let m = block_maps(&p, &[a.clone(), b.clone()], &eps("101")).unwrap();
        assert_eq!(m.expanded, vec![a.clone(), b.clone(), a.clone()]);
        assert_eq!(m.block_epsilon, eps("10"));
        assert_eq!(m.augmentation, vec![a.clone()]);

        let bad = Partition::from_blocks(2, &[vec![0, 1]]).unwrap();
        assert!(matches!(
            block_maps(&bad, std::slice::from_ref(&a), &eps("10")),
            Err(Error::EpsilonNotConstant { .. })
        ));
        assert!(block_maps(&bad, &[a.clone(), b], &eps("11")).is_err());
    }

    #[test]
    fn labeled_examples() {
        let s = LabeledIndex::new(vec![(1, 2)]).unwrap();
        assert_eq!(enumerate_labeled_partitions(&s, &[eps("1")]).unwrap().len(), 2);
        let s = LabeledIndex::new(vec![(2, 2)]).unwrap();
        assert_eq!(enumerate_labeled_partitions(&s, &[eps("11")]).unwrap().len(), 15);
        let s = LabeledIndex::new(vec![(1, 1), (1, 1)]).unwrap();
        let p = enumerate_labeled_partitions(&s, &[eps("1"), eps("0")]).unwrap();
        assert_eq!(p, vec![Partition::singletons(2)]);
    }

    #[test]
    fn labeled_index_layout() {
        let s = LabeledIndex::new(vec![(2, 3), (1, 2), (3, 1)]).unwrap();
        assert_eq!(s.len(), 2 * 3 + 2 + 3);
        let groups = s.groups();
        assert_eq!(groups.len(), 3 + 2 + 1);
        let mut covered = vec![0; s.len()];
        for (alpha, gamma, range) in &groups {
            for (beta, flat) in range.clone().enumerate() {
                covered[flat] += 1;
                let t = LabeledTriple {
                    alpha: *alpha,
                    beta,
                    gamma: *gamma,
                };
                assert_eq!(s.flat_index(t), flat);
                assert_eq!(s.triple(flat), t);
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
        let e = s.flatten_epsilon(&[eps("10"), eps("1"), eps("011")]).unwrap();
        assert_eq!(e.to_string(), "10101011011");
    }

    proptest! {
        #[test]
        fn expansion_determines_partition(n in 1usize..=7, pick in 0usize..1000) {
            let all = enumerate_partitions(n).unwrap();
            let p = &all[pick % all.len()];
            let y: Vec<Point> = (0..p.k()).map(|i| pt(i as f64 * 0.37 + 0.01)).collect();
            let mut expanded = Vec::new();
            p.expand_into(&y, &mut expanded);
            // rebuild the partition from equal values in the expansion
            let mut blocks: Vec<Vec<usize>> = Vec::new();
            let mut values: Vec<Point> = Vec::new();
            for (i, v) in expanded.iter().enumerate() {
                match values.iter().position(|w| w == v) {
                    Some(b) => blocks[b].push(i),
                    None => { values.push(v.clone()); blocks.push(vec![i]); }
                }
            }
            prop_assert_eq!(&Partition::from_blocks(n, &blocks).unwrap(), p);
        }

        #[test]
        fn admissible_count_matches_filter(n in 1usize..=8, bits in 0u32..256) {
            let e = EpsilonVector::new((0..n).map(|i| bits >> i & 1 == 1).collect()).unwrap();
            let mut filtered = 0u64;
            for_each_partition(n, None, |p| if p.is_admissible(&e) { filtered += 1 }).unwrap();
            prop_assert_eq!(count_epsilon_partitions(n, &e).unwrap(), filtered);
        }
    }
}
