//! Strictly increasing multi-indices labelling the basis covectors `dx^I`,
//! and the single sign routine every fiberwise operator uses.
//!
//! Axes are 0-based in code (`dx^1` of the usual notation is axis 0).
//! Components of a rank-q form are stored in lexicographic order over the
//! strictly increasing q-tuples; this order is part of the container format.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 16;

/// A strictly increasing index tuple, stored as a bit set of axes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex(u32);

impl MultiIndex {
    pub const EMPTY: MultiIndex = MultiIndex(0);

    /// Builds a multi-index from strictly increasing 0-based axes.
    pub fn new(axes: &[usize], dim: usize) -> Result<Self> {
        let invalid = || Error::InvalidMultiIndex {
            indices: axes.to_vec(),
            dim,
        };
        if dim > MAX_DIM {
            return Err(invalid());
        }
        let mut mask = 0u32;
        let mut prev: Option<usize> = None;
        for &a in axes {
            if a >= dim || prev.is_some_and(|p| p >= a) {
                return Err(invalid());
            }
            mask |= 1 << a;
            prev = Some(a);
        }
        Ok(MultiIndex(mask))
    }

    pub fn single(axis: usize) -> Self {
        MultiIndex(1 << axis)
    }

    pub fn from_mask(mask: u32) -> Self {
        MultiIndex(mask)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn rank(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    pub fn is_disjoint(self, other: MultiIndex) -> bool {
        self.0 & other.0 == 0
    }

    pub fn union(self, other: MultiIndex) -> MultiIndex {
        MultiIndex(self.0 | other.0)
    }

    pub fn with(self, axis: usize) -> MultiIndex {
        MultiIndex(self.0 | (1 << axis))
    }

    pub fn without(self, axis: usize) -> MultiIndex {
        MultiIndex(self.0 & !(1 << axis))
    }

    pub fn complement(self, dim: usize) -> MultiIndex {
        MultiIndex(!self.0 & full_mask(dim))
    }

    /// Axes in increasing order.
    pub fn axes(self) -> impl Iterator<Item = usize> {
        let mut m = self.0;
        std::iter::from_fn(move || {
            if m == 0 {
                None
            } else {
                let a = m.trailing_zeros() as usize;
                m &= m - 1;
                Some(a)
            }
        })
    }

    /// 0-based position of `axis` inside the sorted tuple (number of smaller members).
    pub fn position_of(self, axis: usize) -> usize {
        (self.0 & ((1u32 << axis) - 1)).count_ones() as usize
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dx^{{")?;
        for (k, a) in self.axes().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", a + 1)?;
        }
        write!(f, "}}")
    }
}

fn full_mask(dim: usize) -> u32 {
    if dim >= 32 {
        u32::MAX
    } else {
        (1u32 << dim) - 1
    }
}

/// Sign of the permutation sorting the concatenation `(I, J)` into `I ∪ J`,
/// or `None` when the two index sets overlap (the wedge term vanishes).
///
/// This is the one sign convention shared by wedge, star, R, T, interior
/// products and the normal-derivative formulas.
pub fn shuffle_sign(first: MultiIndex, second: MultiIndex) -> Option<f64> {
    if !first.is_disjoint(second) {
        return None;
    }
    // inversions: pairs (i in first, j in second) with i > j
    let inversions: u32 = second
        .axes()
        .map(|j| (first.0 >> (j + 1)).count_ones())
        .sum();
    Some(if inversions % 2 == 0 { 1.0 } else { -1.0 })
}

/// `(-1)^k` as a float.
pub fn parity_sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// The ordered component basis of rank-q forms in dimension N.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    dim: usize,
    rank: usize,
    indices: Vec<MultiIndex>,
    lookup: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl Basis {
    pub fn new(dim: usize, rank: usize) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "dimension {dim} exceeds {MAX_DIM}"
            )));
        }
        if rank > dim {
            return Err(Error::RankOverflow { rank, dim });
        }
        let mut indices = Vec::with_capacity(binomial(dim, rank));
        let mut current: Vec<usize> = (0..rank).collect();
        loop {
            let mask = current.iter().fold(0u32, |m, &a| m | (1 << a));
            indices.push(MultiIndex(mask));
            // next strictly increasing tuple in lexicographic order
            let mut i = rank;
            loop {
                if i == 0 {
                    let mut lookup = vec![ABSENT; 1 << dim];
                    for (pos, idx) in indices.iter().enumerate() {
                        lookup[idx.0 as usize] = pos as u32;
                    }
                    return Ok(Basis {
                        dim,
                        rank,
                        indices,
                        lookup,
                    });
                }
                i -= 1;
                if current[i] < dim - rank + i {
                    current[i] += 1;
                    for j in i + 1..rank {
                        current[j] = current[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn get(&self, pos: usize) -> MultiIndex {
        self.indices[pos]
    }

    /// Storage position of `index`, if it belongs to this basis.
    pub fn position(&self, index: MultiIndex) -> Option<usize> {
        match self.lookup.get(index.0 as usize) {
            Some(&p) if p != ABSENT => Some(p as usize),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order() {
        let b = Basis::new(4, 2).unwrap();
        let tuples: Vec<Vec<usize>> = b.indices().iter().map(|i| i.axes().collect()).collect();
        assert_eq!(
            tuples,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(Basis::new(3, 0).unwrap().len(), 1);
        assert_eq!(Basis::new(3, 3).unwrap().len(), 1);
        for n in 1..=6 {
            for q in 0..=n {
                let b = Basis::new(n, q).unwrap();
                assert_eq!(b.len(), binomial(n, q));
                for (p, i) in b.indices().iter().enumerate() {
                    assert_eq!(b.position(*i), Some(p));
                    assert_eq!(i.rank(), q);
                }
            }
        }
    }

    #[test]
    fn rejects_non_increasing() {
        assert!(MultiIndex::new(&[1, 0], 3).is_err());
        assert!(MultiIndex::new(&[1, 1], 3).is_err());
        assert!(MultiIndex::new(&[3], 3).is_err());
        assert!(Basis::new(2, 3).is_err());
    }

    #[test]
    fn shuffle_signs() {
        let d1 = MultiIndex::single(0);
        let d2 = MultiIndex::single(1);
        assert_eq!(shuffle_sign(d1, d2), Some(1.0));
        assert_eq!(shuffle_sign(d2, d1), Some(-1.0));
        assert_eq!(shuffle_sign(d1, d1), None);
        // (2) then (1,3): one inversion
        let i13 = MultiIndex::new(&[0, 2], 3).unwrap();
        assert_eq!(shuffle_sign(d2, i13), Some(-1.0));
    }

    #[test]
    fn shuffle_sign_matches_brute_force_permutation_parity() {
        // brute force: count inversions of the concatenated sequence
        for dim in 1..=5usize {
            for a in 0u32..(1 << dim) {
                for b in 0u32..(1 << dim) {
                    let ia = MultiIndex(a);
                    let ib = MultiIndex(b);
                    let seq: Vec<usize> = ia.axes().chain(ib.axes()).collect();
                    let mut inv = 0;
                    for i in 0..seq.len() {
                        for j in i + 1..seq.len() {
                            if seq[i] > seq[j] {
                                inv += 1;
                            }
                        }
                    }
                    let expected = if a & b != 0 {
                        None
                    } else {
                        Some(parity_sign(inv))
                    };
                    assert_eq!(shuffle_sign(ia, ib), expected);
                }
            }
        }
    }
}
