use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Base-2 entropy of `M / ||M||_1` for a nonnegative vector `M`.
pub fn entropy_bits<T: Scalar>(memory: &[T]) -> Result<f64> {
    let mut total = 0.0;
    for (i, v) in memory.iter().enumerate() {
        let v = v.to_f64_lossy();
        if !(v >= 0.0) || !v.is_finite() {
            return Err(invalid(format!("memory entry {i} is negative or non-finite")));
        }
        total += v;
    }
    if total <= 0.0 {
        return Err(invalid("entropy of an all-zero vector is undefined"));
    }
    let h: f64 = memory
        .iter()
        .map(|v| v.to_f64_lossy() / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    // rounding can push a uniform vector a hair past log2(d)
    Ok(h.clamp(0.0, (memory.len() as f64).log2()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_one_hot() {
        assert_eq!(entropy_bits(&vec![1.0; 1024]).unwrap(), 10.0);
        assert_eq!(entropy_bits(&[0.0, 3.0, 0.0]).unwrap(), 0.0);
        assert_eq!(entropy_bits(&[5.0]).unwrap(), 0.0);
    }

    #[test]
    fn fully_connected_max_column() {
        let d = 3072 * 100 + 100 + 100 * 10 + 10;
        assert_eq!(d, 308_310);
        let h = entropy_bits(&vec![0.25f64; d]).unwrap();
        assert!((h - 18.234).abs() <= 1e-3, "{h}");
    }

    #[test]
    fn concentration_lowers_entropy() {
        // each vector is majorized by the next
        let chain = [
            [1.0, 1.0, 1.0, 1.0],
            [2.0, 1.0, 0.5, 0.5],
            [3.0, 0.5, 0.25, 0.25],
            [3.5, 0.5, 0.0, 0.0],
            [4.0, 0.0, 0.0, 0.0],
        ];
        for w in chain.windows(2) {
            assert!(entropy_bits(&w[1]).unwrap() < entropy_bits(&w[0]).unwrap());
        }
    }

    #[test]
    fn errors() {
        assert!(entropy_bits(&[0.0, 0.0]).is_err());
        assert!(entropy_bits(&[1.0, -1.0]).is_err());
        assert!(entropy_bits(&[f64::NAN]).is_err());
    }
}
