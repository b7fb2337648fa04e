//! The depth-`t` cylinder basis: the finite-dimensional space all operators
//! act on. Words are kept in lexicographic order so matrix layouts are
//! reproducible across runs.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::subshift::{common_prefix_len, SubshiftModel, Word};

#[derive(Debug, Clone)]
pub struct CylinderBasis {
    model: SubshiftModel,
    depth: usize,
    words: Vec<Word>,
    index: HashMap<Vec<u8>, usize>,
}

impl CylinderBasis {
    pub fn new(model: &SubshiftModel, depth: usize) -> Result<Arc<Self>> {
        let words = model.enumerate_words(depth)?;
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.symbols().to_vec(), i))
            .collect();
        Ok(Arc::new(CylinderBasis {
            model: model.clone(),
            depth,
            words,
            index,
        }))
    }

    pub fn model(&self) -> &SubshiftModel {
        &self.model
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn word(&self, i: usize) -> &Word {
        &self.words[i]
    }

    /// Index of a basis word; the first `depth` symbols of `symbols` are used.
    pub fn index_of(&self, symbols: &[u8]) -> Result<usize> {
        if symbols.len() < self.depth {
            return Err(Error::input(format!(
                "word of length {} is shorter than basis depth {}",
                symbols.len(),
                self.depth
            )));
        }
        self.index
            .get(&symbols[..self.depth])
            .copied()
            .ok_or_else(|| Error::input("word is not admissible for this subshift".to_string()))
    }

    /// Indices of basis words lying in the cylinder of `prefix`
    /// (a contiguous range thanks to the lexicographic order).
    pub fn cylinder_range(&self, prefix: &[u8]) -> std::ops::Range<usize> {
        let lo = self.words.partition_point(|w| w.symbols() < prefix);
        let hi = self.words.partition_point(|w| {
            w.symbols().len() >= prefix.len() && &w.symbols()[..prefix.len()] <= prefix
                || w.symbols() < prefix
        });
        lo..hi
    }

    /// Longest common prefix of two basis words.
    pub fn common_prefix(&self, i: usize, j: usize) -> usize {
        common_prefix_len(&self.words[i], &self.words[j])
    }

    /// `D_theta` between two basis words.
    pub fn d_theta(&self, i: usize, j: usize) -> f64 {
        self.model.d_theta(&self.words[i], &self.words[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let m = SubshiftModel::golden_mean(0.5).unwrap();
        let b = CylinderBasis::new(&m, 4).unwrap();
        for (i, w) in b.words().iter().enumerate() {
            assert_eq!(b.index_of(w.symbols()).unwrap(), i);
        }
        assert!(b.index_of(&[1, 1, 0, 0]).is_err());
        assert!(b.index_of(&[0]).is_err());
    }

    #[test]
    fn cylinder_ranges_are_contiguous() {
        let m = SubshiftModel::golden_mean(0.5).unwrap();
        let b = CylinderBasis::new(&m, 5).unwrap();
        let r = b.cylinder_range(&[0, 1]);
        assert!(!r.is_empty());
        for i in r.clone() {
            assert_eq!(&b.word(i).symbols()[..2], &[0, 1]);
        }
        for i in 0..b.len() {
            if !r.contains(&i) {
                assert_ne!(&b.word(i).symbols()[..2], &[0, 1]);
            }
        }
    }
}
