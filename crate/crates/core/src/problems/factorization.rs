use rand::Rng;

use super::{Coords, FiniteSumProblem};
use crate::error::{invalid, Result};
use crate::sampling::RngStream;
use crate::scalar::Real;
use crate::vecops::DenseVec;

/// Squared-loss matrix factorization over observed ratings.
///
/// Component `i` is the observed entry `(u, v, r)` with
/// `f_i = 0.5 (P_u^T Q_v - r)^2 + (ridge / 2)(||P_u||^2 + ||Q_v||^2)`.
/// Parameters are `P` (users x rank) followed by `Q` (items x rank), so each
/// component gradient touches `2 * rank` coordinates.
#[derive(Clone, Debug)]
pub struct MatrixFactorization<T> {
    users: usize,
    items: usize,
    rank: usize,
    ratings: Vec<(usize, usize, T)>,
    ridge: T,
}

impl<T: Real> MatrixFactorization<T> {
    pub fn new(users: usize, items: usize, rank: usize, ratings: Vec<(usize, usize, T)>, ridge: T) -> Result<Self> {
        if rank == 0 {
            return Err(invalid("rank must be at least 1"));
        }
        if ratings.is_empty() {
            return Err(invalid("no observed ratings"));
        }
        if let Some(&(u, v, _)) = ratings.iter().find(|&&(u, v, _)| u >= users || v >= items) {
            return Err(invalid(format!("rating ({u}, {v}) outside a {users} x {items} matrix")));
        }
        Ok(Self {
            users,
            items,
            rank,
            ratings,
            ridge,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.users, self.items)
    }

    pub fn ratings(&self) -> &[(usize, usize, T)] {
        &self.ratings
    }

    fn user_range(&self, u: usize) -> std::ops::Range<usize> {
        u * self.rank..(u + 1) * self.rank
    }

    fn item_range(&self, v: usize) -> std::ops::Range<usize> {
        let base = self.users * self.rank;
        base + v * self.rank..base + (v + 1) * self.rank
    }

    fn residual(&self, i: usize, x: &[T]) -> T {
        let (u, v, r) = self.ratings[i];
        super::dot(&x[self.user_range(u)], &x[self.item_range(v)]) - r
    }
}

impl<T: Real> FiniteSumProblem<T> for MatrixFactorization<T> {
    fn n(&self) -> usize {
        self.ratings.len()
    }

    fn dim(&self) -> usize {
        (self.users + self.items) * self.rank
    }

    fn name(&self) -> &'static str {
        "matrix-factorization"
    }

    fn loss_i(&self, i: usize, x: &[T]) -> T {
        let (u, v, _) = self.ratings[i];
        let e = self.residual(i, x);
        let half = T::cast_f64(0.5);
        let reg = crate::vecops::norm2_sq(&x[self.user_range(u)]) + crate::vecops::norm2_sq(&x[self.item_range(v)]);
        half * e * e + half * self.ridge * reg
    }

    fn add_component_grad(&self, i: usize, x: &[T], coords: Coords<'_>, out: &mut [T]) {
        let (u, v, _) = self.ratings[i];
        let e = self.residual(i, x);
        let (pu, qv) = (self.user_range(u), self.item_range(v));
        // partner coordinate: P_u[c] pairs with Q_v[c]
        let coord = |j: usize| -> Option<T> {
            if pu.contains(&j) {
                Some(e * x[qv.start + (j - pu.start)] + self.ridge * x[j])
            } else if qv.contains(&j) {
                Some(e * x[pu.start + (j - qv.start)] + self.ridge * x[j])
            } else {
                None
            }
        };
        match coords {
            Coords::All => {
                for j in pu.clone().chain(qv.clone()) {
                    out[j] = out[j] + coord(j).unwrap();
                }
            }
            Coords::Subset(idx) => {
                for (o, &j) in out.iter_mut().zip(idx) {
                    if let Some(g) = coord(j) {
                        *o = *o + g;
                    }
                }
            }
        }
    }

    fn initial_point(&self, rng: &mut RngStream) -> DenseVec<T> {
        let scale = 1.0 / (self.rank as f64).sqrt();
        DenseVec::from_vec_unchecked(
            (0..self.dim())
                .map(|_| T::cast_f64(scale * rng.gen_range(-1.0..1.0)))
                .collect(),
        )
    }
}
