//! Seeded random streams, mini-batch sampling and geometric inner-loop lengths.

use rand::distributions::{Distribution, Open01};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{invalid, Result};

/// Stream ids used by the optimizers. Each source of randomness gets its own
/// stream so that replaying one (say, the operator subsets) leaves the others
/// untouched.
pub mod streams {
    pub const BATCH: u64 = 1;
    pub const OPERATOR: u64 = 2;
    pub const INNER_LENGTH: u64 = 3;
    pub const OUTPUT: u64 = 4;
    pub const INIT: u64 = 5;
}

/// A counter-based random stream identified by `(seed, stream)`.
///
/// Backed by ChaCha20, whose output is fixed by the key (the seed) and the
/// stream word, independent of platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw from the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        Open01.sample(&mut self.inner)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Uniform random subset of `0..n` of the given size, without replacement, ascending.
///
/// Uses Floyd's algorithm when `size` is small relative to `n` and a partial
/// Fisher-Yates shuffle otherwise.
pub fn sample_batch<R: Rng + ?Sized>(n: usize, size: usize, rng: &mut R) -> Result<Vec<usize>> {
    if size == 0 || size > n {
        return Err(invalid(format!("batch size {size} must be in 1..={n}")));
    }
    if size == n {
        return Ok((0..n).collect());
    }
    let mut out = if size * 8 < n {
        let mut chosen: Vec<usize> = Vec::with_capacity(size);
        for j in n - size..n {
            let t = rng.gen_range(0..=j);
            if chosen.contains(&t) {
                chosen.push(j);
            } else {
                chosen.push(t);
            }
        }
        chosen
    } else {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..size {
            let j = rng.gen_range(i..n);
            pool.swap(i, j);
        }
        pool.truncate(size);
        pool
    };
    out.sort_unstable();
    Ok(out)
}

/// Geometric distribution on `{0, 1, 2, ...}` with mean `m`:
/// `P(N = k) = gamma^k (1 - gamma)` where `gamma = m / (m + 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeomParams {
    m: f64,
    gamma: f64,
}

impl GeomParams {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(invalid(format!("geometric mean must be positive, got {m}")));
        }
        Ok(Self {
            m,
            gamma: m / (m + 1.0),
        })
    }

    pub fn mean(&self) -> f64 {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.gamma.powf(k as f64) * (1.0 - self.gamma)
    }
}

/// Inverse-CDF draw: `floor(ln U / ln gamma)` with `U` uniform on (0, 1).
pub fn draw_geometric(p: &GeomParams, rng: &mut RngStream) -> u64 {
    let u = rng.open01();
    (u.ln() / p.gamma.ln()).floor() as u64
}

/// Monte-Carlo check of the identity `E(D_N - D_{N+1}) = (D_0 - E D_N) / m`
/// for `N ~ Geom(m)`. Both sides are estimated from the same draws.
pub fn check_geom_lemma(
    m: f64,
    sequence: impl Fn(u64) -> f64,
    trials: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let p = GeomParams::new(m)?;
    let (mut diff, mut level) = (0.0, 0.0);
    for _ in 0..trials {
        let n = draw_geometric(&p, rng);
        let dn = sequence(n);
        diff += dn - sequence(n + 1);
        level += dn;
    }
    let t = trials as f64;
    let lhs = diff / t;
    let rhs = (sequence(0) - level / t) / m;
    Ok((lhs, rhs))
}
