use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use super::{dot, Coords, FiniteSumProblem, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vecops::DenseVec;

/// `f_i(x) = 0.5 (a_i^T x - b_i)^2 + (ridge / 2) ||x||^2`.
#[derive(Debug)]
pub struct LeastSquares<T> {
    a: Matrix<T>,
    b: Vec<T>,
    ridge: T,
    normal: OnceLock<NormalEquations<T>>,
}

/// `(A^T A / n + ridge I)` and `A^T b / n`, cached for cheap full gradients.
#[derive(Debug)]
struct NormalEquations<T> {
    hessian: Vec<T>,
    rhs: Vec<T>,
}

impl<T: Real> LeastSquares<T> {
    pub fn new(a: Matrix<T>, b: Vec<T>, ridge: T) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                found: b.len(),
            });
        }
        if !(ridge >= T::zero()) {
            return Err(crate::error::invalid("ridge must be nonnegative"));
        }
        Ok(Self {
            a,
            b,
            ridge,
            normal: OnceLock::new(),
        })
    }

    pub fn design(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn targets(&self) -> &[T] {
        &self.b
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    fn normal(&self) -> &NormalEquations<T> {
        self.normal.get_or_init(|| {
            let (n, d) = (self.a.rows(), self.a.cols());
            let nt = T::from_usize_exact(n);
            let mut hessian = vec![T::zero(); d * d];
            let mut rhs = vec![T::zero(); d];
            for i in 0..n {
                let row = self.a.row(i);
                for j in 0..d {
                    rhs[j] = rhs[j] + row[j] * self.b[i];
                    for k in j..d {
                        hessian[j * d + k] = hessian[j * d + k] + row[j] * row[k];
                    }
                }
            }
            for j in 0..d {
                rhs[j] = rhs[j] / nt;
                for k in j..d {
                    let v = hessian[j * d + k] / nt + if j == k { self.ridge } else { T::zero() };
                    hessian[j * d + k] = v;
                    hessian[k * d + j] = v;
                }
            }
            NormalEquations { hessian, rhs }
        })
    }

    /// Minimizer of the full objective via the normal equations (SVD solve in f64).
    pub fn solve(&self) -> Result<DenseVec<T>> {
        let d = self.a.cols();
        let ne = self.normal();
        let h = DMatrix::from_row_slice(d, d, &ne.hessian.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>());
        let r = DVector::from_iterator(d, ne.rhs.iter().map(|v| v.to_f64_lossy()));
        let sol = match h.clone().cholesky() {
            Some(ch) => ch.solve(&r),
            None => h
                .svd(true, true)
                .solve(&r, 1e-12)
                .map_err(|e| crate::error::invalid(format!("normal equations: {e}")))?,
        };
        DenseVec::new(sol.iter().map(|&v| T::cast_f64(v)).collect())
    }
}

impl<T: Real> FiniteSumProblem<T> for LeastSquares<T> {
    fn n(&self) -> usize {
        self.a.rows()
    }

    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn name(&self) -> &'static str {
        "least-squares"
    }

    fn loss_i(&self, i: usize, x: &[T]) -> T {
        let r = dot(self.a.row(i), x) - self.b[i];
        let half = T::cast_f64(0.5);
        half * r * r + half * self.ridge * crate::vecops::norm2_sq(x)
    }

    fn add_component_grad(&self, i: usize, x: &[T], coords: Coords<'_>, out: &mut [T]) {
        let row = self.a.row(i);
        let r = dot(row, x) - self.b[i];
        let coord = |j: usize| r * row[j] + self.ridge * x[j];
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
        Some(self.a.max_row_norm_sq() + self.ridge)
    }

    fn known_minimum(&self) -> Option<(DenseVec<T>, T)> {
        let x = self.solve().ok()?;
        let f = self.full_loss(&x).ok()?;
        Some((x, f))
    }

    fn cheap_full_grad(&self, x: &[T]) -> Option<DenseVec<T>> {
        let d = self.a.cols();
        let ne = self.normal();
        let g = (0..d)
            .map(|j| dot(&ne.hessian[j * d..(j + 1) * d], x) - ne.rhs[j])
            .collect();
        DenseVec::new(g).ok()
    }
}
