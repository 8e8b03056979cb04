//! Data-parallel point loops.
//!
//! With the `parallel` feature (default) large loops are split across the
//! rayon pool; without it, or after [`set_sequential`], everything runs on the
//! calling thread. Results are always collected in index order and all
//! floating-point reductions happen sequentially afterwards, so output does not
//! depend on the thread count.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Loops shorter than this stay on one thread.
static MIN_PARALLEL_LEN: AtomicUsize = AtomicUsize::new(4096);

/// Forces (or releases) sequential execution at runtime.
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

/// Overrides the loop length below which work is not split.
pub fn set_min_parallel_len(n: usize) {
    MIN_PARALLEL_LEN.store(n, Ordering::Relaxed);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

fn split(n: usize) -> bool {
    is_parallel() && n >= MIN_PARALLEL_LEN.load(Ordering::Relaxed)
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if split(n) {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = split;
    (0..n).map(f).collect()
}

/// Fallible [`map`]; on failure returns the error with the smallest index.
pub fn try_map<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if split(n) {
        use rayon::prelude::*;
        let all: Vec<Result<T, E>> = (0..n).into_par_iter().map(f).collect();
        return all.into_iter().collect();
    }
    (0..n).map(f).collect()
}

/// Fills `out` in chunks of `width` values per point.
pub fn fill_chunks<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if split(out.len() / width.max(1)) {
        use rayon::prelude::*;
        out.par_chunks_mut(width).enumerate().for_each(|(p, c)| f(p, c));
        return;
    }
    out.chunks_mut(width).enumerate().for_each(|(p, c)| f(p, c));
}
