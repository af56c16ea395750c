//! Seeded synthetic datasets.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::dataset::{Data, Dataset, DatasetKind};
use crate::error::{invalid, Result};
use crate::sampling::{sample_batch, streams, RngStream};
use crate::vecops::norm2_sq;

/// Generator knobs. Each kind reads only the fields it needs.
#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub n: usize,
    pub d: usize,
    /// Nonzeros of the planted vector (planted-sparse-ls).
    pub active: usize,
    /// Standard deviation of additive label noise.
    pub noise: f64,
    /// Euclidean norm of the planted vector.
    pub signal: f64,
    /// Feature magnitude on the planted support (planted-sparse-ls).
    pub feature_scale: f64,
    /// Feature magnitude off the planted support (planted-sparse-ls).
    pub background: f64,
    /// Distance between class means (logistic-blobs).
    pub separation: f64,
    pub users: usize,
    pub items: usize,
    pub rank: usize,
    /// Observed entries (low-rank-ratings).
    pub observed: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 20,
            active: 5,
            noise: 0.1,
            signal: 1.0,
            feature_scale: 1.0,
            background: 0.01,
            separation: 2.0,
            users: 50,
            items: 40,
            rank: 2,
            observed: 600,
        }
    }
}

pub fn generate(kind: DatasetKind, params: &GenParams, seed: u64) -> Result<Dataset> {
    let mut rng = RngStream::new(seed, streams::INIT);
    let mut ds = match kind {
        DatasetKind::GaussianLs => gaussian_ls(params, &mut rng)?,
        DatasetKind::PlantedSparseLs => planted_sparse_ls(params, &mut rng)?,
        DatasetKind::LogisticBlobs => logistic_blobs(params, &mut rng)?,
        DatasetKind::LowRankRatings => low_rank_ratings(params, &mut rng)?,
    };
    ds.kind = Some(kind);
    ds.meta.insert("seed".into(), seed.to_string());
    Ok(ds)
}

fn normal(rng: &mut RngStream) -> f64 {
    rng.sample(StandardNormal)
}

fn check_shape(p: &GenParams) -> Result<()> {
    if p.n == 0 || p.d == 0 {
        return Err(invalid("n and d must be positive"));
    }
    Ok(())
}

/// Rescales `v` to Euclidean norm `target` (no-op on the zero vector).
fn set_norm(v: &mut [f64], target: f64) {
    let norm = norm2_sq(v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x *= target / norm;
        }
    }
}

/// Dense Gaussian design with rows of expected unit norm and a dense planted vector.
fn gaussian_ls(p: &GenParams, rng: &mut RngStream) -> Result<Dataset> {
    check_shape(p)?;
    let mut x_star: Vec<f64> = (0..p.d).map(|_| normal(rng)).collect();
    set_norm(&mut x_star, p.signal);
    let scale = 1.0 / (p.d as f64).sqrt();
    let features: Vec<Vec<f64>> = (0..p.n)
        .map(|_| (0..p.d).map(|_| scale * normal(rng)).collect())
        .collect();
    let labels = responses(&features, &x_star, p.noise, rng);
    Ok(table(labels, features, Some(x_star), p))
}

/// Random-sign features: magnitude `feature_scale` on `active` planted
/// coordinates and `background` elsewhere; the planted vector lives on those
/// coordinates only. Every row has the same squared norm
/// `active * feature_scale^2 + (d - active) * background^2`.
fn planted_sparse_ls(p: &GenParams, rng: &mut RngStream) -> Result<Dataset> {
    check_shape(p)?;
    if p.active == 0 || p.active > p.d {
        return Err(invalid(format!("active must be in 1..={}", p.d)));
    }
    let support = sample_batch(p.d, p.active, rng)?;
    let mut scale = vec![p.background; p.d];
    let mut x_star = vec![0.0; p.d];
    for &j in &support {
        scale[j] = p.feature_scale;
        // bounded away from zero so the support size is exact
        let magnitude = 0.5 + rng.gen::<f64>();
        x_star[j] = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
    }
    set_norm(&mut x_star, p.signal);
    let features: Vec<Vec<f64>> = (0..p.n)
        .map(|_| {
            scale
                .iter()
                .map(|&s| if rng.gen_bool(0.5) { s } else { -s })
                .collect()
        })
        .collect();
    let labels = responses(&features, &x_star, p.noise, rng);
    let mut ds = table(labels, features, Some(x_star), p);
    ds.meta.insert("active".into(), p.active.to_string());
    ds.meta.insert("feature_scale".into(), p.feature_scale.to_string());
    ds.meta.insert("background".into(), p.background.to_string());
    Ok(ds)
}

/// Two Gaussian classes labelled -1/+1 with means `+-separation/2` along the diagonal.
fn logistic_blobs(p: &GenParams, rng: &mut RngStream) -> Result<Dataset> {
    check_shape(p)?;
    let shift = 0.5 * p.separation / (p.d as f64).sqrt();
    let mut labels = Vec::with_capacity(p.n);
    let features: Vec<Vec<f64>> = (0..p.n)
        .map(|_| {
            let y = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            labels.push(y);
            (0..p.d)
                .map(|_| y * shift + normal(rng) / (p.d as f64).sqrt())
                .collect()
        })
        .collect();
    let mut ds = table(labels, features, None, p);
    ds.meta.insert("separation".into(), p.separation.to_string());
    Ok(ds)
}

/// Ratings `P_u^T Q_v + noise` on a uniformly random set of observed cells.
/// The planted vector is `P` followed by `Q`, matching the factorization layout.
fn low_rank_ratings(p: &GenParams, rng: &mut RngStream) -> Result<Dataset> {
    if p.users == 0 || p.items == 0 || p.rank == 0 {
        return Err(invalid("users, items and rank must be positive"));
    }
    let cells = p.users * p.items;
    if p.observed == 0 || p.observed > cells {
        return Err(invalid(format!("observed must be in 1..={cells}")));
    }
    let scale = 1.0 / (p.rank as f64).powf(0.25);
    let factors: Vec<f64> = (0..(p.users + p.items) * p.rank)
        .map(|_| scale * normal(rng))
        .collect();
    let (pu, qv) = factors.split_at(p.users * p.rank);
    let entries = sample_batch(cells, p.observed, rng)?
        .into_iter()
        .map(|cell| {
            let (u, v) = (cell / p.items, cell % p.items);
            let clean: f64 = (0..p.rank).map(|c| pu[u * p.rank + c] * qv[v * p.rank + c]).sum();
            (u, v, clean + p.noise * normal(rng))
        })
        .collect();
    let mut meta = BTreeMap::new();
    meta.insert("rank".into(), p.rank.to_string());
    meta.insert("noise".into(), p.noise.to_string());
    Ok(Dataset {
        kind: None,
        data: Data::Ratings {
            users: p.users,
            items: p.items,
            entries,
        },
        planted: Some(factors),
        meta,
    })
}

fn responses(features: &[Vec<f64>], x_star: &[f64], noise: f64, rng: &mut RngStream) -> Vec<f64> {
    features
        .iter()
        .map(|row| {
            let clean: f64 = row.iter().zip(x_star).map(|(a, b)| a * b).sum();
            clean + noise * normal(rng)
        })
        .collect()
}

fn table(labels: Vec<f64>, features: Vec<Vec<f64>>, planted: Option<Vec<f64>>, p: &GenParams) -> Dataset {
    let mut meta = BTreeMap::new();
    meta.insert("noise".into(), p.noise.to_string());
    Dataset {
        kind: None,
        data: Data::Table { labels, features },
        planted,
        meta,
    }
}
