use std::ops::Range;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::sparsity::{RtopSupport, SparsityParams};
use crate::vecops::SparseVec;

/// Splits `k1` and `k2` across blocks of the given sizes.
///
/// `k = k1 + k2` and `k2` are each shared in proportion to block size with
/// largest-remainder rounding; block `l` then gets `k1_l = k_l - k2_l`. A
/// repair pass makes every block valid on its own: at least one kept
/// coordinate, and `k2_l >= 1` unless the block is kept whole.
pub fn allocate_block_budget(sizes: &[usize], k1: usize, k2: usize) -> Result<Vec<SparsityParams>> {
    let d: usize = sizes.iter().sum();
    SparsityParams::new(k1, k2, d)?;
    if sizes.contains(&0) {
        return Err(invalid("empty parameter block"));
    }
    let mut k = largest_remainder(sizes, k1 + k2);
    // every block keeps at least one coordinate
    for l in 0..sizes.len() {
        if k[l] == 0 {
            let donor = (0..sizes.len())
                .filter(|&o| k[o] > 1)
                .max_by_key(|&o| k[o])
                .ok_or_else(|| invalid("k1 + k2 is smaller than the number of blocks"))?;
            k[donor] -= 1;
            k[l] += 1;
        }
    }
    let mut k2s: Vec<usize> = largest_remainder(sizes, k2)
        .into_iter()
        .zip(&k)
        .map(|(a, &b)| a.min(b))
        .collect();
    let mut missing = k2 - k2s.iter().sum::<usize>();
    // place rounding leftovers where a block has room
    for l in 0..sizes.len() {
        while missing > 0 && k2s[l] < k[l] {
            k2s[l] += 1;
            missing -= 1;
        }
    }
    // a partially kept block needs a random coordinate to rescale
    for l in 0..sizes.len() {
        if k2s[l] == 0 && k[l] < sizes[l] {
            let donor = (0..sizes.len())
                .filter(|&o| o != l && (k2s[o] > 1 || (k2s[o] == 1 && k[o] == sizes[o])))
                .max_by_key(|&o| k2s[o])
                .ok_or_else(|| invalid("k2 is too small to give every partially kept block a random coordinate"))?;
            k2s[donor] -= 1;
            k2s[l] += 1;
        }
    }
    let params = sizes
        .iter()
        .zip(k.iter().zip(&k2s))
        .map(|(&s, (&kl, &k2l))| SparsityParams::new(kl - k2l, k2l, s))
        .collect::<Result<Vec<_>>>()?;
    debug_assert_eq!(params.iter().map(|p| p.k1()).sum::<usize>(), k1);
    debug_assert_eq!(params.iter().map(|p| p.k2()).sum::<usize>(), k2);
    Ok(params)
}

fn largest_remainder(sizes: &[usize], total: usize) -> Vec<usize> {
    let d: usize = sizes.iter().sum();
    let mut out: Vec<usize> = sizes.iter().map(|&s| total * s / d).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // remainders compared exactly as integers; ties go to the earlier block
    order.sort_by_key(|&l| (std::cmp::Reverse(total * sizes[l] % d), l));
    let short = total - out.iter().sum::<usize>();
    for &l in order.iter().take(short) {
        out[l] += 1;
    }
    out
}

/// The operator applied either to the whole vector or blockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Sparsifier {
    d: usize,
    blocks: Vec<(Range<usize>, SparsityParams)>,
}

impl Sparsifier {
    pub fn whole(k1: usize, k2: usize, d: usize) -> Result<Self> {
        Ok(Self {
            d,
            blocks: vec![(0..d, SparsityParams::new(k1, k2, d)?)],
        })
    }

    /// Blockwise operator. Blocks must tile `0..d` in order.
    pub fn blockwise(blocks: &[Range<usize>], k1: usize, k2: usize) -> Result<Self> {
        let mut next = 0;
        for b in blocks {
            if b.start != next || b.end <= b.start {
                return Err(invalid("blocks must be nonempty and tile 0..d in order"));
            }
            next = b.end;
        }
        let sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
        let params = allocate_block_budget(&sizes, k1, k2)?;
        Ok(Self {
            d: next,
            blocks: blocks.iter().cloned().zip(params).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Total kept coordinates `k1 + k2`.
    pub fn k(&self) -> usize {
        self.blocks.iter().map(|(_, p)| p.k()).sum()
    }

    pub fn block_params(&self) -> Vec<SparsityParams> {
        self.blocks.iter().map(|(_, p)| *p).collect()
    }

    /// Draws the kept coordinates from `score`, block by block.
    pub fn draw<T: Scalar, R: Rng + ?Sized>(&self, score: &[T], rng: &mut R) -> Result<DrawnSupport<T>> {
        if score.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: score.len(),
            });
        }
        let mut parts = Vec::with_capacity(self.blocks.len());
        let mut indices = Vec::with_capacity(self.k());
        for (range, params) in &self.blocks {
            let s = RtopSupport::draw(&score[range.clone()], *params, rng)?;
            indices.extend(s.support().iter().map(|i| i + range.start));
            parts.push((range.start, s));
        }
        Ok(DrawnSupport {
            d: self.d,
            parts,
            indices,
        })
    }
}

/// Kept coordinates of one draw, ready to be applied to values on them.
#[derive(Clone, Debug)]
pub struct DrawnSupport<T> {
    d: usize,
    parts: Vec<(usize, RtopSupport<T>)>,
    indices: Vec<usize>,
}

impl<T: Scalar> DrawnSupport<T> {
    /// All kept coordinates, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// The deterministic top sets of all blocks, ascending.
    pub fn top(&self) -> Vec<usize> {
        self.parts
            .iter()
            .flat_map(|(off, s)| s.top().iter().map(move |i| i + off))
            .collect()
    }

    /// Applies the operator to values given on [`DrawnSupport::indices`].
    pub fn apply_restricted(&self, values: &[T]) -> Result<SparseVec<T>> {
        if values.len() != self.indices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.indices.len(),
                found: values.len(),
            });
        }
        let mut entries = Vec::with_capacity(values.len());
        let mut pos = 0;
        for (off, s) in &self.parts {
            let len = s.support().len();
            let part = s.apply_restricted(&values[pos..pos + len])?;
            entries.extend(part.entries().iter().map(|&(i, v)| (i + off, v)));
            pos += len;
        }
        Ok(SparseVec::from_sorted_unchecked(self.d, entries))
    }

    /// Applies the operator to a dense vector.
    pub fn apply(&self, y: &[T]) -> Result<SparseVec<T>> {
        if y.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: y.len(),
            });
        }
        let values: Vec<T> = self.indices.iter().map(|&i| y[i]).collect();
        self.apply_restricted(&values)
    }
}
