//! The random-top-k operator `rtop_{k1,k2}`.
//!
//! Given a score vector `x` (the memory vector during optimization) and a
//! vector `y`, the operator keeps `y` on the `k1` coordinates where `|x|` is
//! largest and on `k2` coordinates drawn uniformly from the rest, rescaling
//! the random part by `(d - k1) / k2`. The result is an unbiased estimate of
//! `y` whose variance is `((d - k1 - k2) / k2) * ||top_{-k1}(x, y)||^2`.

mod select;

pub use select::select_top_k1;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vecops::{DenseVec, SparseVec};

/// Largest number of subsets [`rtop_enumerate`] will visit.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SparsityParams {
    k1: usize,
    k2: usize,
    d: usize,
}

impl SparsityParams {
    pub fn new(k1: usize, k2: usize, d: usize) -> Result<Self> {
        let fail = |reason| Err(Error::InvalidSparsity { k1, k2, d, reason });
        if d == 0 {
            return fail("dimension must be positive");
        }
        if k1 + k2 == 0 {
            return fail("k1 + k2 must be at least 1");
        }
        if k1 > d || k2 > d - k1 {
            return fail("k1 + k2 must not exceed d");
        }
        if k2 == 0 && k1 < d {
            return fail("k2 must be positive unless k1 == d");
        }
        Ok(Self { k1, k2, d })
    }

    pub fn k1(&self) -> usize {
        self.k1
    }

    pub fn k2(&self) -> usize {
        self.k2
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `k1 + k2`, the number of coordinates an update touches.
    pub fn k(&self) -> usize {
        self.k1 + self.k2
    }

    /// True when the operator returns its input unchanged.
    pub fn is_dense(&self) -> bool {
        self.k() == self.d
    }

    /// The `(d - k1) / k2` factor applied to randomly kept coordinates.
    pub fn random_scale<T: Scalar>(&self) -> T {
        if self.k2 == 0 {
            return T::one();
        }
        T::from_usize_exact(self.d - self.k1) / T::from_usize_exact(self.k2)
    }

    /// Number of distinct random subsets, `binomial(d - k1, k2)`.
    pub fn subset_count(&self) -> u128 {
        binomial(self.d - self.k1, self.k2)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// The coordinates an `rtop` call keeps, fixed before `y` is looked at.
///
/// Splitting the draw from the application lets the optimizer evaluate
/// gradients only on [`RtopSupport::support`].
#[derive(Clone, Debug, PartialEq)]
pub struct RtopSupport<T> {
    params: SparsityParams,
    top: Vec<usize>,
    random: Vec<usize>,
    support: Vec<usize>,
    weights: Vec<T>,
}

impl<T: Scalar> RtopSupport<T> {
    /// Selects the top-`k1` set from `score` and draws the random subset from its complement.
    pub fn draw<R: Rng + ?Sized>(score: &[T], params: SparsityParams, rng: &mut R) -> Result<Self> {
        check_dim(score.len(), params.d)?;
        let top = select_top_k1(score, params.k1)?;
        let complement = complement_of(&top, params.d);
        let random = if params.k1 + params.k2 == params.d {
            complement
        } else {
            sample_subset(complement, params.k2, rng)
        };
        Ok(Self::assemble(params, top, random))
    }

    /// Like [`RtopSupport::draw`] with the random subset given explicitly.
    pub fn with_random_subset(score: &[T], params: SparsityParams, mut random: Vec<usize>) -> Result<Self> {
        check_dim(score.len(), params.d)?;
        let top = select_top_k1(score, params.k1)?;
        random.sort_unstable();
        random.dedup();
        if random.len() != params.k2 {
            return Err(crate::error::invalid(format!(
                "random subset must hold {} distinct indices",
                params.k2
            )));
        }
        if random.iter().any(|i| *i >= params.d || top.binary_search(i).is_ok()) {
            return Err(crate::error::invalid(
                "random subset must lie in the complement of the top set",
            ));
        }
        Ok(Self::assemble(params, top, random))
    }

    fn assemble(params: SparsityParams, top: Vec<usize>, random: Vec<usize>) -> Self {
        let scale = params.random_scale::<T>();
        let mut support = Vec::with_capacity(top.len() + random.len());
        let mut weights = Vec::with_capacity(top.len() + random.len());
        let (mut a, mut b) = (0, 0);
        while a < top.len() || b < random.len() {
            if b == random.len() || (a < top.len() && top[a] < random[b]) {
                support.push(top[a]);
                weights.push(T::one());
                a += 1;
            } else {
                support.push(random[b]);
                weights.push(scale);
                b += 1;
            }
        }
        Self {
            params,
            top,
            random,
            support,
            weights,
        }
    }

    pub fn params(&self) -> SparsityParams {
        self.params
    }

    /// The deterministic top-`k1` set, ascending.
    pub fn top(&self) -> &[usize] {
        &self.top
    }

    /// The random set `S`, ascending.
    pub fn random(&self) -> &[usize] {
        &self.random
    }

    /// `top ∪ random`, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Applies the operator to a dense `y`.
    pub fn apply(&self, y: &[T]) -> Result<SparseVec<T>> {
        check_dim(y.len(), self.params.d)?;
        let entries = self
            .support
            .iter()
            .zip(&self.weights)
            .map(|(&i, &w)| (i, w * y[i]))
            .collect();
        finish(self.params.d, entries)
    }

    /// Applies the operator given only `y` on [`RtopSupport::support`], in the same order.
    pub fn apply_restricted(&self, y_on_support: &[T]) -> Result<SparseVec<T>> {
        check_dim(y_on_support.len(), self.support.len())?;
        let entries = self
            .support
            .iter()
            .zip(&self.weights)
            .zip(y_on_support)
            .map(|((&i, &w), &v)| (i, w * v))
            .collect();
        finish(self.params.d, entries)
    }
}

fn finish<T: Scalar>(d: usize, entries: Vec<(usize, T)>) -> Result<SparseVec<T>> {
    if let Some(&(index, _)) = entries.iter().find(|e| !e.1.is_finite_value()) {
        return Err(Error::NonFinite { index });
    }
    Ok(SparseVec::from_sorted_unchecked(d, entries))
}

fn check_dim(found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn complement_of(sorted: &[usize], d: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(d - sorted.len());
    let mut it = sorted.iter().peekable();
    for i in 0..d {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Partial Fisher-Yates: a uniform `k`-subset of `pool`, returned ascending.
fn sample_subset<R: Rng + ?Sized>(mut pool: Vec<usize>, k: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(k <= pool.len());
    for i in 0..k {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool.sort_unstable();
    pool
}

/// `rtop_{k1,k2}(score, y)` with the random subset drawn from `rng`.
pub fn rtop<T: Scalar, R: Rng + ?Sized>(
    score: &[T],
    y: &[T],
    params: SparsityParams,
    rng: &mut R,
) -> Result<SparseVec<T>> {
    check_dim(y.len(), params.d)?;
    RtopSupport::draw(score, params, rng)?.apply(y)
}

/// `y` with the top-`k1` coordinates of `score` zeroed.
pub fn top_neg_k1<T: Scalar>(score: &[T], y: &[T], k1: usize) -> Result<DenseVec<T>> {
    check_dim(y.len(), score.len())?;
    let top = select_top_k1(score, k1)?;
    let mut out = y.to_vec();
    for i in top {
        out[i] = T::zero();
    }
    DenseVec::new(out)
}

/// Exact mean and total variance of `rtop(score, y)` over every admissible random subset.
///
/// The variance is summed over coordinates. Refuses to run when more than
/// [`ENUMERATION_LIMIT`] subsets exist.
pub fn rtop_enumerate<T: Scalar>(
    score: &[T],
    y: &[T],
    params: SparsityParams,
) -> Result<(DenseVec<T>, T)> {
    check_dim(score.len(), params.d)?;
    check_dim(y.len(), params.d)?;
    let count = params.subset_count();
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let top = select_top_k1(score, params.k1)?;
    let complement = complement_of(&top, params.d);
    let d = params.d;

    let outcomes = |visit: &mut dyn FnMut(&[T])| -> Result<()> {
        let mut combo: Vec<usize> = (0..params.k2).collect();
        loop {
            let subset: Vec<usize> = combo.iter().map(|&c| complement[c]).collect();
            let support = RtopSupport::with_random_subset(score, params, subset)?;
            let dense = crate::vecops::densify(&support.apply(y)?);
            visit(dense.as_slice());
            if !next_combination(&mut combo, complement.len()) {
                return Ok(());
            }
        }
    };

    let n = T::from_u128(count).expect("subset count fits the scalar type");
    let mut sum = vec![T::zero(); d];
    outcomes(&mut |v| {
        for (s, &x) in sum.iter_mut().zip(v) {
            *s = *s + x;
        }
    })?;
    let mean: Vec<T> = sum.into_iter().map(|s| s / n).collect();

    let mut sq = vec![T::zero(); d];
    outcomes(&mut |v| {
        for ((s, &x), &mu) in sq.iter_mut().zip(v).zip(&mean) {
            let dev = x - mu;
            *s = *s + dev * dev;
        }
    })?;
    let variance = sq.into_iter().fold(T::zero(), |acc, s| acc + s / n);
    Ok((DenseVec::new(mean)?, variance))
}

/// Advances `combo` to the next `k`-combination of `0..n` in lexicographic order.
pub(crate) fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecops::{densify, norm2_sq};
    use num_rational::Ratio;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const X: [f64; 5] = [11.0, 12.0, 13.0, -14.0, -15.0];
    const Y: [f64; 5] = [-25.0, -24.0, 13.0, 12.0, 11.0];

    #[test]
    fn params_validation() {
        assert!(SparsityParams::new(1, 1, 5).is_ok());
        assert!(SparsityParams::new(5, 0, 5).is_ok());
        assert!(SparsityParams::new(0, 0, 5).is_err());
        assert!(SparsityParams::new(4, 0, 5).is_err());
        assert!(SparsityParams::new(3, 3, 5).is_err());
        assert!(SparsityParams::new(6, 0, 5).is_err());
        assert_eq!(SparsityParams::new(1, 1, 5).unwrap().random_scale::<f64>(), 4.0);
    }

    #[test]
    fn worked_example_with_forced_subset() {
        let p = SparsityParams::new(1, 1, 5).unwrap();
        let support = RtopSupport::with_random_subset(&X, p, vec![1]).unwrap();
        let out = densify(&support.apply(&Y).unwrap());
        assert_eq!(out.as_slice(), &[0.0, -96.0, 0.0, 0.0, 11.0]);
    }

    #[test]
    fn forced_subset_must_avoid_top_set() {
        let p = SparsityParams::new(1, 1, 5).unwrap();
        assert!(RtopSupport::with_random_subset(&X, p, vec![4]).is_err());
        assert!(RtopSupport::with_random_subset(&X, p, vec![0, 1]).is_err());
    }

    #[test]
    fn full_budget_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k1 in 0..=5 {
            let p = SparsityParams::new(k1, 5 - k1, 5).unwrap();
            let out = densify(&rtop(&X, &Y, p, &mut rng).unwrap());
            assert_eq!(out.as_slice(), &Y);
        }
    }

    #[test]
    fn zero_input_gives_zero_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = SparsityParams::new(2, 2, 5).unwrap();
        let out = rtop(&X, &[0.0; 5], p, &mut rng).unwrap();
        assert_eq!(out.nnz(), 4);
        assert!(out.entries().iter().all(|e| e.1 == 0.0));
    }

    #[test]
    fn rtop_rejects_mismatched_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = SparsityParams::new(1, 1, 5).unwrap();
        assert!(rtop(&X, &Y[..4], p, &mut rng).is_err());
        assert!(rtop(&X[..4], &Y[..4], p, &mut rng).is_err());
    }

    #[test]
    fn top_neg_examples() {
        assert_eq!(top_neg_k1(&X, &Y, 1).unwrap().as_slice(), &[-25.0, -24.0, 13.0, 12.0, 0.0]);
        assert_eq!(top_neg_k1(&X, &Y, 0).unwrap().as_slice(), &Y);
        assert_eq!(top_neg_k1(&X, &Y, 5).unwrap().as_slice(), &[0.0; 5]);
        assert!(top_neg_k1(&X, &Y, 6).is_err());
    }

    #[test]
    fn worked_example_enumeration() {
        let p = SparsityParams::new(1, 1, 5).unwrap();
        let (mean, var) = rtop_enumerate(&X, &Y, p).unwrap();
        assert_eq!(mean.as_slice(), &Y);
        // four non-top coordinates, each 4*y w.p. 1/4: variance 3*y^2 apiece
        assert_eq!(var, 3.0 * 1514.0);
    }

    #[test]
    fn enumeration_degenerate_cases() {
        let p = SparsityParams::new(2, 3, 5).unwrap();
        let (mean, var) = rtop_enumerate(&X, &Y, p).unwrap();
        assert_eq!(mean.as_slice(), &Y);
        assert_eq!(var, 0.0);

        let p = SparsityParams::new(1, 2, 5).unwrap();
        let (mean, var) = rtop_enumerate(&X, &[0.0; 5], p).unwrap();
        assert_eq!(mean.as_slice(), &[0.0; 5]);
        assert_eq!(var, 0.0);
    }

    #[test]
    fn enumeration_guard() {
        let d = 40;
        let x = vec![1.0; d];
        let p = SparsityParams::new(0, 20, d).unwrap();
        assert!(matches!(
            rtop_enumerate(&x, &x, p),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn exact_rational_enumeration_matches_variance_formula() {
        type Q = Ratio<i64>;
        let q = |v: i64| Q::from_integer(v);
        let score: Vec<Q> = [3, -1, 4, 1, -5, 9, 2].iter().map(|&v| q(v)).collect();
        let y: Vec<Q> = [2, 7, -1, 8, 2, -8, 1].iter().map(|&v| q(v)).collect();
        for k1 in 0..7 {
            for k2 in 1..=(7 - k1) {
                let p = SparsityParams::new(k1, k2, 7).unwrap();
                let (mean, var) = rtop_enumerate(&score, &y, p).unwrap();
                assert_eq!(mean.as_slice(), y.as_slice());
                let resid = top_neg_k1(&score, &y, k1).unwrap();
                let expected = Q::new((7 - k1 - k2) as i64, k2 as i64) * norm2_sq(&resid);
                assert_eq!(var, expected, "k1={k1} k2={k2}");
            }
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 1), 4);
        assert_eq!(binomial(12, 6), 924);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, usize, usize, u64)> {
        (2usize..16).prop_flat_map(|d| {
            (
                proptest::collection::vec(-10.0f64..10.0, d),
                proptest::collection::vec(-10.0f64..10.0, d),
                proptest::collection::vec(-10.0f64..10.0, d),
                0..d,
            )
                .prop_flat_map(move |(x, y, z, k1)| {
                    (Just(x), Just(y), Just(z), Just(k1), 1..=(d - k1), any::<u64>())
                })
        })
    }

    proptest! {
        #[test]
        fn support_is_disjoint_union((x, y, _z, k1, k2, seed) in instance()) {
            let d = x.len();
            let p = SparsityParams::new(k1, k2, d).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = RtopSupport::draw(&x, p, &mut rng).unwrap();
            prop_assert_eq!(s.support().len(), k1 + k2);
            prop_assert!(s.top().iter().all(|i| s.random().binary_search(i).is_err()));
            let out = s.apply(&y).unwrap();
            prop_assert!(out.indices().all(|i| s.support().binary_search(&i).is_ok()));
        }

        #[test]
        fn linear_in_y_under_replay((x, y, z, k1, k2, seed) in instance(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let d = x.len();
            let p = SparsityParams::new(k1, k2, d).unwrap();
            let combo: Vec<f64> = y.iter().zip(&z).map(|(u, v)| a * u + b * v).collect();
            let run = |v: &[f64]| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                densify(&rtop(&x, v, p, &mut rng).unwrap())
            };
            let (ry, rz, rc) = (run(&y), run(&z), run(&combo));
            for i in 0..d {
                prop_assert!((rc[i] - (a * ry[i] + b * rz[i])).abs() <= 1e-12);
            }
        }
    }
}
