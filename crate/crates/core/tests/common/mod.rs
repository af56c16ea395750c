#![allow(dead_code)]

use rand::Rng;
use sparse_vr::problems::dataset::{Dataset, DatasetKind};
use sparse_vr::problems::synth::{generate, GenParams};
use sparse_vr::problems::{FiniteSumProblem, LeastSquares, Logistic, Matrix, MatrixFactorization, Mlp};
use sparse_vr::sampling::RngStream;

/// Central-difference gradient of the full objective.
pub fn fd_grad(p: &dyn FiniteSumProblem<f64>, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|j| {
            xp[j] = x[j] + h;
            let up = p.full_loss(&xp).unwrap();
            xp[j] = x[j] - h;
            let down = p.full_loss(&xp).unwrap();
            xp[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn random_vec(r: &mut RngStream, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| r.gen_range(-scale..scale)).collect()
}

pub fn random_least_squares(r: &mut RngStream, n: usize, d: usize, ridge: f64) -> LeastSquares<f64> {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_vec(r, d, 1.0)).collect();
    let b = random_vec(r, n, 1.0);
    LeastSquares::new(Matrix::from_rows(&rows).unwrap(), b, ridge).unwrap()
}

pub fn random_logistic(r: &mut RngStream, n: usize, d: usize, ridge: f64) -> Logistic<f64> {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_vec(r, d, 1.0)).collect();
    let y = (0..n).map(|_| if r.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    Logistic::new(Matrix::from_rows(&rows).unwrap(), y, ridge).unwrap()
}

pub fn blobs(n: usize, d: usize, seed: u64) -> Dataset {
    let params = GenParams {
        n,
        d,
        ..GenParams::default()
    };
    generate(DatasetKind::LogisticBlobs, &params, seed).unwrap()
}

pub fn small_mlp(seed: u64) -> Mlp<f64> {
    blobs(60, 4, seed).mlp(&[5], 1e-3).unwrap()
}

pub fn small_factorization(seed: u64) -> MatrixFactorization<f64> {
    let params = GenParams {
        users: 12,
        items: 9,
        rank: 2,
        observed: 70,
        ..GenParams::default()
    };
    generate(DatasetKind::LowRankRatings, &params, seed)
        .unwrap()
        .factorization(2, 1e-2)
        .unwrap()
}

pub fn planted_sparse(n: usize, d: usize, active: usize, seed: u64) -> LeastSquares<f64> {
    let params = GenParams {
        n,
        d,
        active,
        ..GenParams::default()
    };
    generate(DatasetKind::PlantedSparseLs, &params, seed)
        .unwrap()
        .least_squares(0.0)
        .unwrap()
}

/// Isotropic counterpart of [`planted_sparse`] with the same row norm
/// (so the same `L`), and a dense planted vector scaled so that `sigma^2`
/// and `Delta_f` also match.
pub fn isotropic_control(n: usize, d: usize, active: usize, seed: u64) -> LeastSquares<f64> {
    let base = GenParams::default();
    let row_norm_sq = active as f64 * base.feature_scale.powi(2) + (d - active) as f64 * base.background.powi(2);
    let s = (row_norm_sq / d as f64).sqrt();
    let params = GenParams {
        n,
        d,
        active: d,
        feature_scale: s,
        signal: base.signal / s,
        ..base
    };
    generate(DatasetKind::PlantedSparseLs, &params, seed)
        .unwrap()
        .least_squares(0.0)
        .unwrap()
}
