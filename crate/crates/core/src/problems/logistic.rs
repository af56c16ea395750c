use super::{dot, Coords, FiniteSumProblem, Matrix};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// `f_i(x) = log(1 + exp(-y_i a_i^T x)) + (ridge / 2) ||x||^2` with `y_i` in {-1, +1}.
#[derive(Clone, Debug)]
pub struct Logistic<T> {
    a: Matrix<T>,
    labels: Vec<T>,
    ridge: T,
}

impl<T: Real> Logistic<T> {
    pub fn new(a: Matrix<T>, labels: Vec<T>, ridge: T) -> Result<Self> {
        if labels.len() != a.rows() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                found: labels.len(),
            });
        }
        if let Some(i) = labels.iter().position(|&y| y != T::one() && y != -T::one()) {
            return Err(invalid(format!("label {i} is not -1 or +1")));
        }
        if !(ridge >= T::zero()) {
            return Err(invalid("ridge must be nonnegative"));
        }
        Ok(Self { a, labels, ridge })
    }

    pub fn design(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn labels(&self) -> &[T] {
        &self.labels
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus<T: Real>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> FiniteSumProblem<T> for Logistic<T> {
    fn n(&self) -> usize {
        self.a.rows()
    }

    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn name(&self) -> &'static str {
        "logistic"
    }

    fn loss_i(&self, i: usize, x: &[T]) -> T {
        let margin = self.labels[i] * dot(self.a.row(i), x);
        softplus(-margin) + T::cast_f64(0.5) * self.ridge * crate::vecops::norm2_sq(x)
    }

    fn add_component_grad(&self, i: usize, x: &[T], coords: Coords<'_>, out: &mut [T]) {
        let row = self.a.row(i);
        let y = self.labels[i];
        let w = -y * sigmoid(-y * dot(row, x));
        let coord = |j: usize| w * row[j] + self.ridge * x[j];
        match coords {
            Coords::All => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = *o + coord(j);
                }
            }
            Coords::Subset(idx) => {
                for (o, &j) in out.iter_mut().zip(idx) {
                    *o = *o + coord(j);
                }
            }
        }
    }

    fn smoothness_hint(&self) -> Option<T> {
        Some(T::cast_f64(0.25) * self.a.max_row_norm_sq() + self.ridge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::testutil::fd_grad;
    use crate::sampling::RngStream;
    use crate::vecops::norm2_sq;
    use rand::Rng;

    fn random_problem(n: usize, d: usize, ridge: f64, seed: u64) -> Logistic<f64> {
        let mut r = RngStream::new(seed, 0);
        let data = (0..n * d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let y = (0..n).map(|_| if r.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        Logistic::new(Matrix::new(n, d, data).unwrap(), y, ridge).unwrap()
    }

    #[test]
    fn gradient_at_origin() {
        let p = random_problem(9, 3, 0.0, 1);
        let g = p.full_grad(&[0.0; 3]).unwrap();
        for j in 0..3 {
            let expected: f64 =
                -(0..9).map(|i| p.labels[i] * p.a.row(i)[j]).sum::<f64>() / 9.0 / 2.0;
            assert!((g[j] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..10 {
            let p = random_problem(15, 4, 0.05, seed);
            let mut r = RngStream::new(seed, 9);
            let x: Vec<f64> = (0..4).map(|_| r.gen_range(-2.0..2.0)).collect();
            let g = p.full_grad(&x).unwrap();
            let fd = fd_grad(&p, &x, 1e-5);
            for (u, v) in g.iter().zip(&fd) {
                assert!((u - v).abs() <= 1e-6, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn separable_with_ridge_has_stationary_point() {
        // separable: label = sign of first feature
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + i as f64 / 20.0), 0.3])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0].signum()).collect();
        let p = Logistic::new(Matrix::from_rows(&rows).unwrap(), y, 0.1).unwrap();
        let step = 1.0 / p.smoothness_hint().unwrap();
        let mut x = vec![0.0, 0.0];
        for _ in 0..5000 {
            let g = p.full_grad(&x).unwrap();
            for j in 0..2 {
                x[j] -= step * g[j];
            }
        }
        assert!(norm2_sq(&p.full_grad(&x).unwrap()).sqrt() <= 1e-6);
    }

    #[test]
    fn rejects_bad_labels() {
        let a = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(Logistic::new(a.clone(), vec![1.0, 0.0], 0.0).is_err());
        assert!(Logistic::new(a, vec![1.0], 0.0).is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0f64) - 2f64.ln()).abs() < 1e-15);
    }
}
