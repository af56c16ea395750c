//! Partial selection of the `k` coordinates with the largest magnitude.
//!
//! Quickselect with median-of-three pivots; once the recursion depth passes
//! `2 * log2(len)` the remaining range is finished with a bounded heap. The
//! ordering is total (magnitude descending, then index ascending), so every
//! key is distinct and the selected set is unique.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

const INSERTION_CUTOFF: usize = 16;

/// Sort key: `a < b` iff `a` ranks ahead of `b` for a top slot.
#[derive(Clone, Copy, Debug)]
struct RankKey<T> {
    mag: T,
    idx: usize,
}

impl<T: Scalar> PartialEq for RankKey<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for RankKey<T> {}

impl<T: Scalar> PartialOrd for RankKey<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for RankKey<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .mag
            .partial_cmp(&self.mag)
            .expect("selection keys must be comparable")
            .then(self.idx.cmp(&other.idx))
    }
}

/// Indices of the `k` entries of `score` with the largest absolute value,
/// sorted ascending. Ties go to the smaller index.
pub fn select_top_k1<T: Scalar>(score: &[T], k: usize) -> Result<Vec<usize>> {
    if k > score.len() {
        return Err(invalid(format!(
            "cannot select {k} coordinates from a vector of length {}",
            score.len()
        )));
    }
    if let Some(i) = score.iter().position(|v| !v.is_finite_value()) {
        return Err(crate::error::Error::NonFinite { index: i });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut keys: Vec<RankKey<T>> = score
        .iter()
        .enumerate()
        .map(|(idx, v)| RankKey {
            mag: num_traits::Signed::abs(v),
            idx,
        })
        .collect();
    if k < keys.len() {
        introselect(&mut keys, k);
    }
    let mut out: Vec<usize> = keys[..k].iter().map(|key| key.idx).collect();
    out.sort_unstable();
    Ok(out)
}

/// Rearranges `keys` so that `keys[..k]` holds the `k` smallest keys.
fn introselect<K: Ord + Copy>(keys: &mut [K], k: usize) {
    let len = keys.len();
    debug_assert!(k > 0 && k < len);
    let mut depth_budget = 2 * (usize::BITS - len.leading_zeros()) as usize;
    let (mut lo, mut hi) = (0usize, len);

    while hi - lo > INSERTION_CUTOFF {
        if depth_budget == 0 {
            heap_select(&mut keys[lo..hi], k - lo);
            return;
        }
        depth_budget -= 1;

        let p = partition(&mut keys[lo..hi]) + lo;
        match k.cmp(&p) {
            Ordering::Less => hi = p,
            Ordering::Equal => return,
            Ordering::Greater => {
                if k == p + 1 {
                    return;
                }
                lo = p + 1;
            }
        }
    }
    insertion_sort(&mut keys[lo..hi]);
}

/// Lomuto partition around a median-of-three pivot; returns the pivot's final slot.
fn partition<K: Ord + Copy>(v: &mut [K]) -> usize {
    let last = v.len() - 1;
    let mid = last / 2;
    // order v[0] <= v[mid] <= v[last], then park the median at the end
    if v[mid] < v[0] {
        v.swap(mid, 0);
    }
    if v[last] < v[0] {
        v.swap(last, 0);
    }
    if v[last] < v[mid] {
        v.swap(last, mid);
    }
    v.swap(mid, last);
    let pivot = v[last];

    let mut store = 0;
    for i in 0..last {
        if v[i] < pivot {
            v.swap(i, store);
            store += 1;
        }
    }
    v.swap(store, last);
    store
}

fn insertion_sort<K: Ord + Copy>(v: &mut [K]) {
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j] < v[j - 1] {
            v.swap(j, j - 1);
            j -= 1;
        }
    }
}

/// Moves the `k` smallest elements of `v` to the front using a max-heap of size `k`.
fn heap_select<K: Ord + Copy>(v: &mut [K], k: usize) {
    if k == 0 || k >= v.len() {
        return;
    }
    let mut heap: BinaryHeap<K> = v[..k].iter().copied().collect();
    for &item in &v[k..] {
        let worst = *heap.peek().expect("heap holds k > 0 items");
        if item < worst {
            heap.pop();
            heap.push(item);
        }
    }
    let best = heap.into_vec();
    let mut rest: Vec<K> = Vec::with_capacity(v.len() - k);
    // everything not kept goes after the prefix; keys are distinct
    let mut kept = best.clone();
    kept.sort_unstable();
    for &item in v.iter() {
        if kept.binary_search(&item).is_err() {
            rest.push(item);
        }
    }
    v[..k].copy_from_slice(&best);
    v[k..].copy_from_slice(&rest);
}
