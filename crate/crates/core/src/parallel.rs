//! Index-ordered parallel map used for replicate batches.

/// `f(0), f(1), ..., f(n - 1)` collected in index order. Runs on the current
/// rayon pool when the `parallel` feature is on.
pub fn map_indexed<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
