//! Finite-sum objectives `f(x) = (1/n) sum_i f_i(x)` and their gradient oracles.
//!
//! Every problem exposes a dense batch gradient and a restricted one that
//! only produces the requested coordinates. The restricted oracle is the one
//! sparse SpiderBoost pays for at `(k1 + k2) / d` units per component; the two
//! are computed by the same per-coordinate code and agree exactly.

mod constants;
pub mod dataset;
mod factorization;
mod least_squares;
mod logistic;
mod mlp;
pub mod synth;

pub use constants::{estimate_constants, ProblemConstants};
pub use factorization::MatrixFactorization;
pub use least_squares::LeastSquares;
pub use logistic::Logistic;
pub use mlp::Mlp;

use std::ops::Range;

use crate::error::{invalid, Error, Result};
use crate::sampling::RngStream;
use crate::scalar::Real;
use crate::vecops::DenseVec;

/// Which coordinates a gradient call should produce.
#[derive(Clone, Copy, Debug)]
pub enum Coords<'a> {
    All,
    /// Ascending coordinate indices; output slot `p` holds coordinate `idx[p]`.
    Subset(&'a [usize]),
}

pub trait FiniteSumProblem<T: Real>: Send + Sync {
    /// Number of components `n`.
    fn n(&self) -> usize;

    /// Parameter dimension `d`.
    fn dim(&self) -> usize;

    fn name(&self) -> &'static str;

    /// `f_i(x)`.
    fn loss_i(&self, i: usize, x: &[T]) -> T;

    /// Adds `grad f_i(x)` on `coords` into `out` (length `d` for [`Coords::All`],
    /// `idx.len()` for a subset).
    ///
    /// Implementations must compute each coordinate with the same arithmetic in
    /// both modes so that restricted and dense results are bit-identical.
    fn add_component_grad(&self, i: usize, x: &[T], coords: Coords<'_>, out: &mut [T]);

    /// Component-wise smoothness constant `L`, when known in closed form.
    fn smoothness_hint(&self) -> Option<T> {
        None
    }

    /// Parameter groups (layers) for per-block sparsity budgets.
    fn blocks(&self) -> Vec<Range<usize>> {
        #[allow(clippy::single_range_in_vec_init)]
        let whole = vec![0..self.dim()];
        whole
    }

    /// The exact minimizer and minimum, for problems that admit a direct solve.
    fn known_minimum(&self) -> Option<(DenseVec<T>, T)> {
        None
    }

    /// Full gradient by a cheaper route than a pass over all components, if one exists.
    fn cheap_full_grad(&self, _x: &[T]) -> Option<DenseVec<T>> {
        None
    }

    /// Starting point. Zero unless the model needs symmetry breaking.
    fn initial_point(&self, _rng: &mut RngStream) -> DenseVec<T> {
        DenseVec::zeros(self.dim())
    }

    fn grad_batch(&self, batch: &[usize], x: &[T]) -> Result<DenseVec<T>> {
        self.check_call(batch, x)?;
        let mut out = vec![T::zero(); self.dim()];
        for &i in batch {
            self.add_component_grad(i, x, Coords::All, &mut out);
        }
        finish_mean(&mut out, batch.len())?;
        Ok(DenseVec::from_vec_unchecked(out))
    }

    /// Batch gradient on `coords` only; slot `p` holds coordinate `coords[p]`.
    fn grad_batch_restricted(&self, batch: &[usize], x: &[T], coords: &[usize]) -> Result<Vec<T>> {
        self.check_call(batch, x)?;
        if coords.windows(2).any(|w| w[0] >= w[1]) || coords.last().is_some_and(|&c| c >= self.dim()) {
            return Err(invalid("restricted coordinates must be ascending and in range"));
        }
        let mut out = vec![T::zero(); coords.len()];
        for &i in batch {
            self.add_component_grad(i, x, Coords::Subset(coords), &mut out);
        }
        finish_mean(&mut out, batch.len())?;
        Ok(out)
    }

    fn component_grad(&self, i: usize, x: &[T]) -> Result<DenseVec<T>> {
        self.grad_batch(&[i], x)
    }

    fn full_grad(&self, x: &[T]) -> Result<DenseVec<T>> {
        let all: Vec<usize> = (0..self.n()).collect();
        self.grad_batch(&all, x)
    }

    fn full_loss(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let total: T = (0..self.n()).map(|i| self.loss_i(i, x)).sum();
        Ok(total / T::from_usize_exact(self.n()))
    }

    #[doc(hidden)]
    fn check_call(&self, batch: &[usize], x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if batch.is_empty() {
            return Err(invalid("empty batch"));
        }
        if let Some(&i) = batch.iter().find(|&&i| i >= self.n()) {
            return Err(invalid(format!("component {i} out of range for n = {}", self.n())));
        }
        Ok(())
    }
}

fn finish_mean<T: Real>(out: &mut [T], count: usize) -> Result<()> {
    let c = T::from_usize_exact(count);
    for (p, v) in out.iter_mut().enumerate() {
        *v = *v / c;
        if !v.is_finite() {
            return Err(Error::NonFinite { index: p });
        }
    }
    Ok(())
}

/// Row-major dense matrix used for design matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("matrix must have at least one row and column"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Largest squared row norm.
    pub fn max_row_norm_sq(&self) -> T {
        (0..self.rows)
            .map(|i| crate::vecops::norm2_sq(self.row(i)))
            .fold(T::zero(), T::max)
    }

    /// Reorders rows by `perm` (row `i` of the result is row `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let data = perm.iter().flat_map(|&p| self.row(p).iter().copied()).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&u, &v)| acc + u * v)
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Central finite differences of `full_loss`, coordinate by coordinate.
    pub fn fd_grad<P: FiniteSumProblem<f64> + ?Sized>(p: &P, x: &[f64], h: f64) -> Vec<f64> {
        let mut xp = x.to_vec();
        (0..x.len())
            .map(|j| {
                let orig = xp[j];
                xp[j] = orig + h;
                let up = p.full_loss(&xp).unwrap();
                xp[j] = orig - h;
                let down = p.full_loss(&xp).unwrap();
                xp[j] = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }
}
