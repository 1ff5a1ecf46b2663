//! Enumeration and indexing of excitation-number-conserving subspaces of an
//! `L`-site hard-core chain.
//!
//! Site indices are 1-based throughout the public API, matching the chain
//! labels `j = 1..L`; storage is 0-based internally.

use crate::error::{Error, Result};

/// A k-excitation occupation pattern: the sorted set of occupied sites.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationPattern {
    sites: Vec<u32>,
}

impl OccupationPattern {
    /// Build a pattern from 1-based site indices. Sites are sorted; duplicates
    /// or out-of-range indices are rejected at basis-lookup time.
    pub fn new(mut sites: Vec<u32>) -> Self {
        sites.sort_unstable();
        Self { sites }
    }

    pub fn sites(&self) -> &[u32] {
        &self.sites
    }

    pub fn excitations(&self) -> usize {
        self.sites.len()
    }

    pub fn contains(&self, site: u32) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    /// Sum of (j - 1) over occupied sites j; the diagonal of dH/dh.
    pub fn stark_weight(&self) -> f64 {
        self.sites.iter().map(|&j| (j - 1) as f64).sum()
    }

    fn valid_for(&self, l: u32, k: u32) -> bool {
        self.sites.len() == k as usize
            && self.sites.iter().all(|&j| (1..=l).contains(&j))
            && self.sites.windows(2).all(|w| w[0] < w[1])
    }
}

impl std::fmt::Display for OccupationPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, s) in self.sites.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

/// Ordered enumeration of all k-excitation patterns on L sites, in
/// lexicographic order on the occupied-site tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    l: u32,
    k: u32,
    patterns: Vec<OccupationPattern>,
}

/// All `binomial(L, k)` patterns in lexicographic order.
pub fn enumerate_basis(l: u32, k: u32) -> Result<SubspaceBasis> {
    if l == 0 || k > l {
        return Err(Error::InvalidDimension(format!(
            "need 1 <= L and k <= L, got L={l}, k={k}"
        )));
    }
    let mut patterns = Vec::with_capacity(binomial(l, k));
    let mut current: Vec<u32> = (1..=k).collect();
    if k == 0 {
        patterns.push(OccupationPattern::new(vec![]));
    } else {
        loop {
            patterns.push(OccupationPattern::new(current.clone()));
            // advance to the next lexicographic combination
            let mut i = k as usize;
            loop {
                if i == 0 {
                    return Ok(SubspaceBasis { l, k, patterns });
                }
                i -= 1;
                if current[i] < l - (k - 1 - i as u32) {
                    current[i] += 1;
                    for j in i + 1..k as usize {
                        current[j] = current[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
    Ok(SubspaceBasis { l, k, patterns })
}

impl SubspaceBasis {
    pub fn sites(&self) -> u32 {
        self.l
    }

    pub fn excitations(&self) -> u32 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.patterns.len()
    }

    pub fn patterns(&self) -> &[OccupationPattern] {
        &self.patterns
    }

    pub fn pattern(&self, index: usize) -> &OccupationPattern {
        &self.patterns[index]
    }

    /// Position of `pattern` in lexicographic order.
    pub fn index_of(&self, pattern: &OccupationPattern) -> Result<usize> {
        if !pattern.valid_for(self.l, self.k) {
            return Err(Error::PatternNotFound(format!(
                "{pattern} is not a valid ({}, {}) pattern",
                self.l, self.k
            )));
        }
        self.patterns
            .binary_search(pattern)
            .map_err(|_| Error::PatternNotFound(pattern.to_string()))
    }
}

pub fn binomial(n: u32, k: u32) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc * (n as u128 - i) / (i + 1);
    }
    acc as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_k1_by_hand() {
        let b = enumerate_basis(2, 1).unwrap();
        assert_eq!(b.dim(), 2);
        assert_eq!(b.pattern(0), &OccupationPattern::new(vec![1]));
        assert_eq!(b.pattern(1), &OccupationPattern::new(vec![2]));
        assert_eq!(b.index_of(&OccupationPattern::new(vec![1])).unwrap(), 0);
    }

    #[test]
    fn l9_single_excitation() {
        let b = enumerate_basis(9, 1).unwrap();
        assert_eq!(b.dim(), 9);
        for j in 1..=9u32 {
            assert_eq!(b.pattern(j as usize - 1).sites(), &[j]);
        }
        assert_eq!(b.index_of(&OccupationPattern::new(vec![5])).unwrap(), 4);
    }

    #[test]
    fn l9_double_excitation() {
        let b = enumerate_basis(9, 2).unwrap();
        assert_eq!(b.dim(), 36);
        assert_eq!(b.pattern(0).sites(), &[1, 2]);
        assert_eq!(b.pattern(35).sites(), &[8, 9]);
        // linear-scan oracle for index_of
        let target = OccupationPattern::new(vec![3, 7]);
        let scan = b.patterns().iter().position(|p| p == &target).unwrap();
        assert_eq!(b.index_of(&target).unwrap(), scan);
    }

    #[test]
    fn invalid_dims_rejected() {
        assert!(enumerate_basis(0, 0).is_err());
        assert!(enumerate_basis(3, 4).is_err());
    }

    #[test]
    fn missing_pattern_rejected() {
        let b = enumerate_basis(4, 2).unwrap();
        assert!(b.index_of(&OccupationPattern::new(vec![1, 5])).is_err());
        assert!(b.index_of(&OccupationPattern::new(vec![1])).is_err());
        assert!(b.index_of(&OccupationPattern::new(vec![2, 2])).is_err());
    }

    #[test]
    fn round_trip_and_size_small_l() {
        for l in 1..=10u32 {
            for k in 0..=l.min(3) {
                let b = enumerate_basis(l, k).unwrap();
                assert_eq!(b.dim(), binomial(l, k));
                for i in 0..b.dim() {
                    assert_eq!(b.index_of(b.pattern(i)).unwrap(), i);
                }
            }
        }
    }

    #[test]
    fn sector_sizes_sum_to_full_space() {
        for l in 1..=10u32 {
            let total: usize = (0..=l).map(|k| binomial(l, k)).sum();
            assert_eq!(total, 1usize << l);
        }
    }
}
