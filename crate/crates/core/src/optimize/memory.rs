use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::vecops::DenseVec;

/// Exponential moving average of `|nu|`, the score that picks the top-`k1` set.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryVector<T> {
    values: DenseVec<T>,
}

impl<T: Real> MemoryVector<T> {
    /// `M_0 = |g|` entrywise.
    pub fn from_abs(g: &[T]) -> Result<Self> {
        let values = DenseVec::new(g.iter().map(|&v| Float::abs(v)).collect())?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &DenseVec<T> {
        &self.values
    }

    /// `M = alpha |nu| + (1 - alpha) M`.
    pub fn update(&mut self, nu: &[T], alpha: T) -> Result<()> {
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(invalid("alpha must lie in [0, 1]"));
        }
        if nu.len() != self.values.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.values.dim(),
                found: nu.len(),
            });
        }
        let keep = T::one() - alpha;
        for (i, (m, v)) in self.values.iter_mut().zip(nu).enumerate() {
            *m = alpha * Float::abs(*v) + keep * *m;
            if !m.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
        }
        Ok(())
    }
}

/// Value-returning form of [`MemoryVector::update`].
pub fn ema_update<T: Real>(mut memory: MemoryVector<T>, nu: &[T], alpha: T) -> Result<MemoryVector<T>> {
    memory.update(nu, alpha)?;
    Ok(memory)
}
