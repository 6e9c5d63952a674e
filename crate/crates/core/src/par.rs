//! Thin data-parallel helpers.
//!
//! Every helper has a rayon implementation (feature `parallel`) and a
//! sequential one with identical semantics. Callers only use them for
//! per-element work or for reductions over fixed-size chunks that are
//! combined in chunk order, so results never depend on scheduling.

/// Chunk length used by order-stable reductions.
pub const REDUCE_CHUNK: usize = 4096;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fills `out` by evaluating `f(index)` for every element.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
    #[cfg(not(feature = "parallel"))]
    out.iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
}

/// Calls `f(row_index, row)` for every `width`-long row of `data`.
pub fn for_each_row<T, F>(data: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(width).enumerate().for_each(|(r, row)| f(r, row));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(width).enumerate().for_each(|(r, row)| f(r, row));
}

/// Maps `0..n` through `f`, preserving order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}

/// Evaluates `f(start, end)` over consecutive `REDUCE_CHUNK`-sized index
/// ranges covering `0..n` and returns the partial results in chunk order.
/// Folding the returned vector sequentially gives a reduction whose rounding
/// does not depend on the thread count.
pub fn chunked<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync + Send,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    map_range(chunks, |c| {
        let start = c * REDUCE_CHUNK;
        f(start, (start + REDUCE_CHUNK).min(n))
    })
}
