//! Index-ordered parallel map over a bounded work pool.

use rayon::prelude::*;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "GAINPDF_THREADS";

/// Explicit request, else `GAINPDF_THREADS`, else rayon's default; the
/// environment cap applies to explicit requests too.
pub fn thread_count(explicit: Option<usize>) -> usize {
    let env_cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    let base = explicit
        .filter(|&n| n > 0)
        .or(env_cap)
        .unwrap_or_else(rayon::current_num_threads);
    match env_cap {
        Some(cap) => base.min(cap),
        None => base,
    }
    .max(1)
}

/// `(0..n).map(f)` evaluated on the pool; output order follows the index.
pub fn par_map<R, F>(n: usize, threads: Option<usize>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    let k = thread_count(threads);
    if k == 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}
