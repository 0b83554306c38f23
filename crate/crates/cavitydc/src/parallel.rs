//! Execution shims: every data-parallel hot loop in the crate goes through one
//! of these helpers, which run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain sequential loops otherwise.
//!
//! All helpers are *deterministic by construction* — results never depend on
//! thread count or scheduling:
//! * chunked mutation touches disjoint slices whose values depend only on
//!   shared read-only state,
//! * reductions either use exact operations (max) or collect ordered partials
//!   and combine them sequentially (sums).

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to consecutive chunks of `data`; `f` receives the flat index of
/// the chunk's first element and the chunk itself.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_chunk_mut<F>(data: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    data.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(ci, slice)| f(ci * chunk, slice));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_chunk_mut<F>(data: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]),
{
    data.chunks_mut(chunk)
        .enumerate()
        .for_each(|(ci, slice)| f(ci * chunk, slice));
}

/// Maximum of `f` over the chunked range `0..n`. `f` reduces one sub-range
/// sequentially; the combination (`max`) is exact, so the result is identical
/// in parallel and sequential builds.
#[cfg(feature = "parallel")]
pub(crate) fn max_over_chunks<F>(n: usize, chunk: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync,
{
    let chunks = n.div_ceil(chunk);
    (0..chunks)
        .into_par_iter()
        .map(|c| f(c * chunk..((c + 1) * chunk).min(n)))
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn max_over_chunks<F>(n: usize, chunk: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64,
{
    let chunks = n.div_ceil(chunk);
    (0..chunks)
        .map(|c| f(c * chunk..((c + 1) * chunk).min(n)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Ordered map over `0..n`: element i of the result is `f(i)`. Order-preserving
/// in both builds, so downstream sequential folds see identical input.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Deterministic chunked sum: partial sums are computed per fixed chunk
/// (sequentially within each), then combined in chunk order, so floating-point
/// rounding is identical regardless of thread count.
pub(crate) fn sum_over_chunks<F>(n: usize, chunk: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(chunk);
    let partials = map_indexed(chunks, |c| f(c * chunk..((c + 1) * chunk).min(n)));
    partials.iter().sum()
}
