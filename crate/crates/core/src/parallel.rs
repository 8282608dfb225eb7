//! Replica fan-out.
//!
//! Replicas are mapped in parallel and collected in index order, so every reduction that
//! follows runs sequentially over the same sequence regardless of the thread count.

use rayon::prelude::*;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "PERCWALK_THREADS";

/// `f(0), f(1), ..., f(count - 1)` evaluated on the worker pool, in index order.
pub fn map_replicas<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Sizes the global pool from `PERCWALK_THREADS` if set. Returns the thread count in use.
/// Has no effect once the global pool exists.
pub fn configure_threads_from_env() -> usize {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    rayon::current_num_threads()
}
