//! Data-parallel map over trial indices with a sequential fallback.
//!
//! With the `parallel` feature (default) the work is distributed via rayon;
//! without it, or with `workers == Some(1)`, the same closure runs
//! sequentially. Output order is by index either way, so aggregation is
//! deterministic regardless of thread count.

/// Maps `f` over `0..n`, optionally bounding rayon worker threads.
pub fn map_indexed<T, F>(n: usize, workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers == Some(1) {
        return map_indexed_sequential(n, f);
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match workers {
            Some(w) => rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .expect("failed to build worker pool")
                .install(|| (0..n).into_par_iter().map(&f).collect()),
            None => (0..n).into_par_iter().map(f).collect(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_sequential(n, f)
    }
}

/// Sequential reference path; always available for benchmarks and tests.
pub fn map_indexed_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
