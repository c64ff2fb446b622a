//! Dense and sparse real vectors.
//!
//! Optimizers work on plain `&[f64]` internally; these types sit at API
//! boundaries where the finiteness and sparsity invariants matter.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fixed-length vector of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if let Some(index) = components.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteArgument { index });
        }
        Ok(Self(components))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn to_sparse(&self) -> SparseVector {
        let entries = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        SparseVector {
            dim: self.0.len(),
            entries,
        }
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DenseVector> for Vec<f64> {
    fn from(v: DenseVector) -> Self {
        v.0
    }
}

/// Sparse vector: sorted `(index, value)` pairs with no explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Builds a sparse vector from arbitrary-order entries. Zero values are
    /// dropped; duplicate or out-of-range indices are rejected.
    pub fn new(dim: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.retain(|(_, v)| *v != 0.0);
        entries.sort_by_key(|(i, _)| *i);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidConfig {
                    key: "sparse.index".into(),
                    reason: format!("duplicate index {}", w[0].0),
                });
            }
        }
        if let Some(&(i, _)) = entries.last() {
            if i >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: i + 1,
                });
            }
        }
        if let Some(index) = entries.iter().position(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteArgument { index });
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|(i, v)| v * dense[*i]).sum()
    }

    pub fn to_dense(&self) -> DenseVector {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        DenseVector(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_finite() {
        assert_eq!(
            DenseVector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFiniteArgument { index: 1 })
        );
    }

    #[test]
    fn sparse_drops_zeros_and_sorts() {
        let s = SparseVector::new(5, vec![(3, 1.5), (0, 0.0), (1, -2.0)]).unwrap();
        assert_eq!(s.entries(), &[(1, -2.0), (3, 1.5)]);
        assert_eq!(s.get(3), 1.5);
        assert_eq!(s.get(2), 0.0);
        assert!(SparseVector::new(2, vec![(2, 1.0)]).is_err());
        assert!(SparseVector::new(4, vec![(1, 1.0), (1, 2.0)]).is_err());
    }

    proptest! {
        #[test]
        fn sparse_dense_round_trip(
            dim in 1usize..40,
            raw in proptest::collection::vec((0usize..40, -1e6f64..1e6), 0..20),
        ) {
            let mut seen = std::collections::BTreeMap::new();
            for (i, v) in raw {
                if i < dim {
                    seen.insert(i, v);
                }
            }
            let s = SparseVector::new(dim, seen.into_iter().collect()).unwrap();
            prop_assert_eq!(s.to_dense().to_sparse(), s.clone());
            let d = s.to_dense();
            prop_assert_eq!(d.to_sparse().to_dense(), d);
        }
    }
}
