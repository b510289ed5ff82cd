//! N:M sparsity pattern descriptor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An N:M pattern keeps N values in every block of M consecutive elements
/// along the input-channel axis of a column.
///
/// Valid choices are N in {1, 2, 4, 8}, M in {2, 4, 8}, N <= M. Patterns with
/// N == M are dense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatternChoice {
    #[serde(rename = "N")]
    pub n: u8,
    #[serde(rename = "M")]
    pub m: u8,
}

impl PatternChoice {
    pub const fn new_unchecked(n: u8, m: u8) -> Self {
        Self { n, m }
    }

    pub fn new(n: u8, m: u8) -> Result<Self> {
        let p = Self { n, m };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(Error::InvalidPattern { n, m })
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self.n, 1 | 2 | 4 | 8) && matches!(self.m, 2 | 4 | 8) && self.n <= self.m
    }

    pub fn is_dense(&self) -> bool {
        self.n == self.m
    }

    /// Fraction of pruned positions, `(M - N) / M`.
    pub fn sparsity(&self) -> f64 {
        f64::from(self.m - self.n) / f64::from(self.m)
    }

    /// Sparsity expressed in eighths; exact for every valid pattern.
    pub fn sparsity_eighths(&self) -> u32 {
        debug_assert_eq!(8 % self.m, 0);
        u32::from(8 / self.m) * u32::from(self.m - self.n)
    }

    /// Metadata width: a block coordinate needs `log2(M)` bits.
    pub fn metadata_bits(&self) -> u32 {
        u32::from(self.m).trailing_zeros()
    }

    /// All nine valid patterns, ordered by (M, N).
    pub fn candidate_set() -> Vec<PatternChoice> {
        let mut set = Vec::new();
        for m in [2u8, 4, 8] {
            for n in [1u8, 2, 4, 8] {
                let p = PatternChoice { n, m };
                if p.is_valid() {
                    set.push(p);
                }
            }
        }
        set
    }
}

impl std::fmt::Display for PatternChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.n, self.m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_set_has_nine_patterns() {
        let set = PatternChoice::candidate_set();
        assert_eq!(set.len(), 9);
        for p in &set {
            assert!(p.is_valid());
            // Every candidate sparsity is a multiple of 1/8.
            assert_eq!(p.sparsity(), f64::from(p.sparsity_eighths()) / 8.0);
        }
    }

    #[test]
    fn sparsity_eighths_values() {
        let cases = [
            ((1, 2), 4),
            ((2, 2), 0),
            ((1, 4), 6),
            ((2, 4), 4),
            ((4, 4), 0),
            ((1, 8), 7),
            ((2, 8), 6),
            ((4, 8), 4),
            ((8, 8), 0),
        ];
        for ((n, m), eighths) in cases {
            assert_eq!(PatternChoice::new(n, m).unwrap().sparsity_eighths(), eighths);
        }
    }

    #[test]
    fn invalid_patterns_rejected() {
        assert!(PatternChoice::new(3, 4).is_err());
        assert!(PatternChoice::new(4, 2).is_err());
        assert!(PatternChoice::new(1, 16).is_err());
    }

    #[test]
    fn metadata_bits_per_block_size() {
        assert_eq!(PatternChoice::new(1, 2).unwrap().metadata_bits(), 1);
        assert_eq!(PatternChoice::new(2, 4).unwrap().metadata_bits(), 2);
        assert_eq!(PatternChoice::new(4, 8).unwrap().metadata_bits(), 3);
    }
}
