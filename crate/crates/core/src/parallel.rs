//! Deterministic work distribution.
//!
//! Every parallel site maps work into index-addressed slots and reduces in
//! fixed index order over fixed-size chunks, so results are bit-identical for
//! any worker count and for the sequential fallback build (`--no-default-features`).

use std::ops::Range;

/// Chunk length for row-wise folds. Fixed so that partial-sum boundaries do
/// not depend on the thread count.
pub(crate) const CHUNK: usize = 1024;

#[cfg(feature = "parallel")]
pub(crate) fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Splits `0..n` into fixed chunks, maps each chunk to a partial value
/// (possibly in parallel) and merges the partials sequentially in chunk order.
pub(crate) fn fold_chunks<A, F, M>(n: usize, f: F, merge: M) -> Option<A>
where
    A: Send,
    F: Fn(Range<usize>) -> A + Sync,
    M: Fn(A, A) -> A,
{
    let ranges = chunk_ranges(n);
    let parts = map_collect(ranges.len(), |i| f(ranges[i].clone()));
    parts.into_iter().reduce(merge)
}

pub(crate) fn chunk_ranges(n: usize) -> Vec<Range<usize>> {
    (0..n)
        .step_by(CHUNK.max(1))
        .map(|start| start..(start + CHUNK).min(n))
        .collect()
}
