use crate::error::{invalid, Error, Result};
use crate::problems::FiniteSumProblem;
use crate::scalar::Real;
use crate::sparsity::select_top_k1;

/// Components swept exactly when computing `G`; larger problems use an
/// evenly strided subsample of this size.
pub const CAPTURE_SWEEP_LIMIT: usize = 10_000;

/// Residual energy of gradient differences outside the top-`k1` set of `M`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparsityCapture {
    /// `||top_{-k1}(M, grad f(x') - grad f(x))||^2`.
    pub g: f64,
    /// `(1/n) sum_i ||top_{-k1}(M, grad f_i(x') - grad f_i(x))||^2`.
    pub big_g: f64,
    /// `g + G / b`.
    pub r: f64,
    /// Number of components behind `big_g`, or `None` for a full sweep.
    pub sampled: Option<usize>,
    /// Standard error of `big_g` (zero for a full sweep).
    pub big_g_stderr: f64,
}

impl SparsityCapture {
    pub fn zero() -> Self {
        Self {
            g: 0.0,
            big_g: 0.0,
            r: 0.0,
            sampled: None,
            big_g_stderr: 0.0,
        }
    }
}

/// Computes `g`, `G` and `R = g + G/b` at one inner step.
#[allow(non_snake_case)]
pub fn measure_g_G<T: Real>(
    problem: &dyn FiniteSumProblem<T>,
    memory: &[T],
    x_next: &[T],
    x_prev: &[T],
    k1: usize,
    b: usize,
) -> Result<SparsityCapture> {
    let d = problem.dim();
    for len in [memory.len(), x_next.len(), x_prev.len()] {
        if len != d {
            return Err(Error::DimensionMismatch { expected: d, found: len });
        }
    }
    if b == 0 {
        return Err(invalid("batch size must be positive"));
    }
    let top = select_top_k1(memory, k1)?;
    let mut keep = vec![true; d];
    for &i in &top {
        keep[i] = false;
    }
    let residual = |diff: &[f64]| -> f64 {
        diff.iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(v, _)| v * v)
            .sum()
    };
    let component_diff = |i: usize| -> Result<Vec<f64>> {
        let a = problem.component_grad(i, x_next)?;
        let c = problem.component_grad(i, x_prev)?;
        Ok(a.iter().zip(c.iter()).map(|(u, v)| (*u - *v).to_f64_lossy()).collect())
    };

    let n = problem.n();
    let (g, big_g, sampled, stderr) = if n <= CAPTURE_SWEEP_LIMIT {
        let mut mean = vec![0.0; d];
        let mut total = 0.0;
        for i in 0..n {
            let diff = component_diff(i)?;
            total += residual(&diff);
            for (m, v) in mean.iter_mut().zip(&diff) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        (residual(&mean), total / n as f64, None, 0.0)
    } else {
        let s = CAPTURE_SWEEP_LIMIT;
        let values = (0..s)
            .map(|j| component_diff(j * n / s).map(|diff| residual(&diff)))
            .collect::<Result<Vec<f64>>>()?;
        let mean = values.iter().sum::<f64>() / s as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s - 1) as f64;
        let a = problem.full_grad(x_next)?;
        let c = problem.full_grad(x_prev)?;
        let diff: Vec<f64> = a.iter().zip(c.iter()).map(|(u, v)| (*u - *v).to_f64_lossy()).collect();
        (residual(&diff), mean, Some(s), (var / s as f64).sqrt())
    };
    if sampled.is_none() {
        // Jensen: the residual mask is linear, so ||mean||^2 <= mean ||.||^2
        assert!(
            g <= big_g * (1.0 + 1e-12) + 1e-300,
            "capture invariant g <= G violated: g={g}, G={big_g}"
        );
    }
    Ok(SparsityCapture {
        g,
        big_g,
        r: g + big_g / b as f64,
        sampled,
        big_g_stderr: stderr,
    })
}

/// `R-bar`: the average of `R` over a set of measurements.
pub fn mean_r(captures: &[SparsityCapture]) -> Option<f64> {
    if captures.is_empty() {
        None
    } else {
        Some(captures.iter().map(|c| c.r).sum::<f64>() / captures.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{LeastSquares, Matrix};

    fn problem() -> LeastSquares<f64> {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..4).map(|j| ((i * 7 + j * 3) % 5) as f64 - 2.0).collect())
            .collect();
        LeastSquares::new(Matrix::from_rows(&rows).unwrap(), vec![1.0; 6], 0.0).unwrap()
    }

    #[test]
    fn identical_points_give_zero() {
        let p = problem();
        let x = [0.3, -0.2, 0.1, 0.5];
        let c = measure_g_G(&p, &[1.0, 2.0, 3.0, 4.0], &x, &x, 1, 2).unwrap();
        assert_eq!((c.g, c.big_g, c.r), (0.0, 0.0, 0.0));
    }

    #[test]
    fn full_mask_gives_zero() {
        let p = problem();
        let c = measure_g_G(&p, &[1.0; 4], &[1.0, 0.0, 0.0, 0.0], &[0.0; 4], 4, 3).unwrap();
        assert_eq!((c.g, c.big_g), (0.0, 0.0));
    }

    #[test]
    fn sparse_differences_inside_top_set_are_captured() {
        // features live on coordinates 1 and 3 only
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| vec![0.0, 1.0 + i as f64, 0.0, 2.0 - i as f64, 0.0])
            .collect();
        let p = LeastSquares::new(Matrix::from_rows(&rows).unwrap(), vec![0.5; 5], 0.0).unwrap();
        let memory = [0.0, 1e6, 1.0, 1e6, 1.0];
        let c = measure_g_G(&p, &memory, &[0.1, 0.4, -0.3, 0.2, 0.9], &[0.0; 5], 2, 4).unwrap();
        assert_eq!((c.g, c.big_g), (0.0, 0.0));

        // a mask missing coordinate 3 leaves residual energy, cross-checked densely
        let memory = [0.0, 1e6, 1.0, 0.0, 1.0];
        let x1 = [0.1, 0.4, -0.3, 0.2, 0.9];
        let c = measure_g_G(&p, &memory, &x1, &[0.0; 5], 2, 4).unwrap();
        let diff = p.full_grad(&x1).unwrap().sub(&p.full_grad(&[0.0; 5]).unwrap()).unwrap();
        let top = select_top_k1(&memory, 2).unwrap();
        let g: f64 = (0..5).filter(|i| !top.contains(i)).map(|i| diff[i] * diff[i]).sum();
        assert!((c.g - g).abs() <= 1e-12 * g.max(1.0));
        assert!(c.g > 0.0 && c.g <= c.big_g);
        assert_eq!(c.r, c.g + c.big_g / 4.0);
    }

    #[test]
    fn mean_of_captures() {
        assert_eq!(mean_r(&[]), None);
        let mut a = SparsityCapture::zero();
        a.r = 2.0;
        assert_eq!(mean_r(&[a, SparsityCapture::zero()]), Some(1.0));
    }
}
