//! Execution policy: rayon data-parallel loops with a sequential fallback.
//!
//! Only independent per-item work is ever distributed; callers keep every
//! floating-point reduction sequential in index order so that results do not
//! depend on thread count or on whether the `parallel` feature is enabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to each `dim`-sized particle row, with a per-worker scratch.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_particle<S, M, F>(state: &mut [f64], dim: usize, make_scratch: M, f: F)
where
    S: Send,
    M: Fn() -> S + Send + Sync,
    F: Fn(&mut S, usize, &mut [f64]) + Send + Sync,
{
    state
        .par_chunks_mut(dim)
        .enumerate()
        .for_each_init(&make_scratch, |scratch, (i, row)| f(scratch, i, row));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_particle<S, M, F>(state: &mut [f64], dim: usize, make_scratch: M, f: F)
where
    S: Send,
    M: Fn() -> S + Send + Sync,
    F: Fn(&mut S, usize, &mut [f64]) + Send + Sync,
{
    let mut scratch = make_scratch();
    for (i, row) in state.chunks_mut(dim).enumerate() {
        f(&mut scratch, i, row);
    }
}

/// Collect `f(0..n)` in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    (0..n).map(f).collect()
}
