//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper preserves index order in its output, and no helper performs a
//! cross-item reduction, so results are bitwise identical regardless of the
//! thread count or whether the `parallel` feature is enabled. A one-thread
//! pool runs inline, skipping the scheduler.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`, possibly in parallel.
#[cfg(feature = "parallel")]
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if rayon::current_num_threads() == 1 {
        return (0..n).map(f).collect();
    }
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Apply `f(row_index, row)` to each `cols`-wide row of `data`.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_row<F>(data: &mut [f64], cols: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if cols == 0 {
        return;
    }
    if rayon::current_num_threads() == 1 {
        return data.chunks_mut(cols).enumerate().for_each(|(r, row)| f(r, row));
    }
    data.par_chunks_mut(cols).enumerate().for_each(|(r, row)| f(r, row));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_row<F>(data: &mut [f64], cols: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if cols == 0 {
        return;
    }
    data.chunks_mut(cols).enumerate().for_each(|(r, row)| f(r, row));
}

/// Whether this build runs the helpers on a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
