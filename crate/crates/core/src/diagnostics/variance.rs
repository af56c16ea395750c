use crate::error::{invalid, Error, Result};
use crate::sampling::RngStream;
use crate::sparsity::ENUMERATION_LIMIT;

/// Coordinate-summed sample variance of a stochastic vector estimator over
/// `trials` independent calls.
///
/// The estimator receives the stream to draw from, so replaying the same
/// stream reproduces the same estimate.
pub fn estimate_estimator_variance<F>(mut estimator: F, trials: usize, rng: &mut RngStream) -> Result<f64>
where
    F: FnMut(&mut RngStream) -> Result<Vec<f64>>,
{
    if trials < 2 {
        return Err(invalid("need at least two trials"));
    }
    // Welford per coordinate
    let mut mean: Vec<f64> = Vec::new();
    let mut m2: Vec<f64> = Vec::new();
    for t in 0..trials {
        let y = estimator(rng)?;
        if t == 0 {
            mean = vec![0.0; y.len()];
            m2 = vec![0.0; y.len()];
        } else if y.len() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: y.len(),
            });
        }
        let k = (t + 1) as f64;
        for ((mu, s), v) in mean.iter_mut().zip(m2.iter_mut()).zip(&y) {
            let delta = v - *mu;
            *mu += delta / k;
            *s += delta * (v - *mu);
        }
    }
    Ok(m2.iter().sum::<f64>() / (trials - 1) as f64)
}

/// Exact total variance of the mean of a uniform size-`b` subsample, drawn
/// without replacement, of the vectors in `population`.
pub fn batch_mean_variance_exact(population: &[Vec<f64>], b: usize) -> Result<f64> {
    let n = population.len();
    if n == 0 || b == 0 || b > n {
        return Err(invalid("need 1 <= b <= n and a nonempty population"));
    }
    let d = population[0].len();
    if let Some(z) = population.iter().find(|z| z.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: z.len(),
        });
    }
    let count = crate::sparsity::binomial(n, b);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    // summed then divided, like the subset means, so b = n gives exactly zero
    let population_mean: Vec<f64> = (0..d)
        .map(|c| population.iter().map(|z| z[c]).sum::<f64>() / n as f64)
        .collect();
    let mut subset: Vec<usize> = (0..b).collect();
    let mut total = 0.0;
    loop {
        for c in 0..d {
            let mean = subset.iter().map(|&i| population[i][c]).sum::<f64>() / b as f64;
            let dev = mean - population_mean[c];
            total += dev * dev;
        }
        if !crate::sparsity::next_combination(&mut subset, n) {
            break;
        }
    }
    Ok(total / count as f64)
}

/// The sampling bound `(1{b < n} / b) (1/n) sum_j ||z_j||^2`.
pub fn batch_mean_variance_bound(population: &[Vec<f64>], b: usize) -> f64 {
    let n = population.len();
    if b >= n {
        return 0.0;
    }
    let energy: f64 = population.iter().map(|z| z.iter().map(|v| v * v).sum::<f64>()).sum();
    energy / (n as f64 * b as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsity::{rtop, SparsityParams};
    use rand::Rng;

    #[test]
    fn deterministic_estimator_has_zero_variance() {
        let mut r = RngStream::new(1, 0);
        let v = estimate_estimator_variance(|_| Ok(vec![1.5, -2.0, 1e6]), 100, &mut r).unwrap();
        assert!(v.abs() <= 1e-20);
    }

    #[test]
    fn rtop_with_empty_top_set() {
        // k1 = 0, k2 = 1, d = 2: variance (d - k2)/k2 ||y||^2 = ||y||^2
        let y = [3.0, -4.0];
        let params = SparsityParams::new(0, 1, 2).unwrap();
        let mut r = RngStream::new(2, 0);
        let v = estimate_estimator_variance(
            |rng| {
                let s = rtop(&[0.0, 0.0], &y, params, rng)?;
                Ok(crate::vecops::densify(&s).into_vec())
            },
            100_000,
            &mut r,
        )
        .unwrap();
        assert!((v - 25.0).abs() <= 0.03 * 25.0, "{v}");
    }

    #[test]
    fn full_batch_mean_is_exact() {
        let pop = vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![4.0, 4.0]];
        assert_eq!(batch_mean_variance_exact(&pop, 3).unwrap(), 0.0);
        let mut r = RngStream::new(3, 0);
        let v = estimate_estimator_variance(
            |rng| {
                let idx = crate::sampling::sample_batch(3, 3, rng)?;
                Ok((0..2).map(|c| idx.iter().map(|&i| pop[i][c]).sum::<f64>() / 3.0).collect())
            },
            50,
            &mut r,
        )
        .unwrap();
        assert!(v.abs() <= 1e-20);
    }

    #[test]
    fn single_draw_variance() {
        // b = 1: variance of a uniformly chosen element
        let pop = vec![vec![1.0], vec![3.0]];
        assert_eq!(batch_mean_variance_exact(&pop, 1).unwrap(), 1.0);
        assert_eq!(batch_mean_variance_bound(&pop, 1), 5.0);
    }

    #[test]
    fn sampling_bound_on_random_populations() {
        let mut r = RngStream::new(4, 0);
        for _ in 0..100 {
            let n = r.gen_range(1..=8);
            let b = r.gen_range(1..=n);
            let d = r.gen_range(1..=4);
            let pop: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| r.gen_range(-3.0..3.0)).collect())
                .collect();
            let exact = batch_mean_variance_exact(&pop, b).unwrap();
            assert!(exact <= batch_mean_variance_bound(&pop, b) + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut r = RngStream::new(0, 0);
        assert!(estimate_estimator_variance(|_| Ok(vec![0.0]), 1, &mut r).is_err());
        assert!(batch_mean_variance_exact(&[], 1).is_err());
        assert!(batch_mean_variance_exact(&[vec![1.0]], 2).is_err());
    }
}
