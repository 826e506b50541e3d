//! Minimal data-parallel helpers with a sequential fallback.
//!
//! Every helper preserves input order in its output, so callers get identical
//! results whichever [`Exec`] mode runs them.

/// Execution strategy for data-parallel loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses the rayon global pool. Falls back to sequential execution when
    /// the crate is built without the `parallel` feature.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

pub fn num_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();

    #[cfg(not(feature = "parallel"))]
    return 1;
}

/// Applies `f` to `0..n` and returns the results in index order.
pub fn map_range<T, F>(n: usize, exec: Exec, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Applies `f` to every element of `items` and returns the results in order.
pub fn map_slice<S, T, F>(items: &[S], exec: Exec, f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Send + Sync,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Runs `f` inside a dedicated pool of `threads` workers (or inline when
/// parallelism is unavailable). Used to bound in-flight model requests.
pub fn with_pool<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
        {
            Ok(pool) => pool.install(f),
            Err(err) => {
                log::warn!("could not build a {threads}-thread pool ({err}); using the global pool");
                f()
            }
        }
    }

    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
