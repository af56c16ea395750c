//! Dense parameter vectors and index/value sparse updates.

use std::ops::{Deref, DerefMut};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// A dense `d`-dimensional vector of parameters or gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseVec<T> {
    values: Vec<T>,
}

impl<T: Scalar> DenseVec<T> {
    /// Wraps `values`, rejecting empty or non-finite input.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("vector dimension must be at least 1"));
        }
        check_finite(&values)?;
        Ok(Self { values })
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1, "vector dimension must be at least 1");
        Self {
            values: vec![T::zero(); d],
        }
    }

    pub fn from_fn(d: usize, f: impl FnMut(usize) -> T) -> Result<Self> {
        Self::new((0..d).map(f).collect())
    }

    pub(crate) fn from_vec_unchecked(values: Vec<T>) -> Self {
        debug_assert!(!values.is_empty());
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite_value())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        check_finite(&self.values)
    }

    /// In-place `self += a * x`.
    pub fn axpy_mut(&mut self, a: T, x: &SparseVec<T>) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        for &(i, v) in x.entries() {
            self.values[i] = self.values[i] + a * v;
        }
        for &(i, _) in x.entries() {
            if !self.values[i].is_finite_value() {
                return Err(Error::NonFinite { index: i });
            }
        }
        Ok(())
    }

    /// In-place `self += a * x` for a dense `x`.
    pub fn axpy_dense_mut(&mut self, a: T, x: &DenseVec<T>) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        for (y, &v) in self.values.iter_mut().zip(x.values.iter()) {
            *y = *y + a * v;
        }
        check_finite(&self.values)
    }

    /// Returns `self - other`.
    pub fn sub(&self, other: &DenseVec<T>) -> Result<DenseVec<T>> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| a - b)
            .collect::<Vec<_>>();
        check_finite(&values)?;
        Ok(Self { values })
    }

    pub fn scale(&self, a: T) -> Result<DenseVec<T>> {
        let values = self.values.iter().map(|&v| a * v).collect::<Vec<_>>();
        check_finite(&values)?;
        Ok(Self { values })
    }

    /// Copy with every coordinate outside `coords` set to zero.
    pub fn masked(&self, coords: &[usize]) -> DenseVec<T> {
        let mut values = vec![T::zero(); self.dim()];
        for &c in coords {
            values[c] = self.values[c];
        }
        Self { values }
    }
}

impl<T> Deref for DenseVec<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.values
    }
}

impl<T> DerefMut for DenseVec<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

fn check_finite<T: Scalar>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite_value()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Index/value pairs over a `dim`-dimensional space, strictly ascending by index.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVec<T> {
    dim: usize,
    entries: Vec<(usize, T)>,
}

impl<T: Scalar> SparseVec<T> {
    pub fn new(dim: usize, entries: Vec<(usize, T)>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("sparse update dimension must be at least 1"));
        }
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(invalid("sparse indices must be strictly ascending"));
            }
        }
        if let Some(&(i, _)) = entries.last() {
            if i >= dim {
                return Err(invalid(format!("sparse index {i} out of range for dim {dim}")));
            }
        }
        check_finite(&entries.iter().map(|e| e.1).collect::<Vec<_>>())?;
        Ok(Self { dim, entries })
    }

    pub fn empty(dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub(crate) fn from_sorted_unchecked(dim: usize, entries: Vec<(usize, T)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }
}

/// Returns `y + a * x`.
pub fn axpy<T: Scalar>(a: T, x: &SparseVec<T>, y: &DenseVec<T>) -> Result<DenseVec<T>> {
    let mut out = y.clone();
    out.axpy_mut(a, x)?;
    Ok(out)
}

/// Squared Euclidean norm.
pub fn norm2_sq<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &v| acc + v * v)
}

pub fn densify<T: Scalar>(x: &SparseVec<T>) -> DenseVec<T> {
    let mut values = vec![T::zero(); x.dim];
    for &(i, v) in &x.entries {
        values[i] = v;
    }
    DenseVec { values }
}
