//! Order-preserving parallel map on the rayon pool.

use std::sync::Once;

use rayon::prelude::*;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "SIMGROUND_WORKERS";

static INIT: Once = Once::new();

/// Sizes the global pool from `n`, or from [`WORKERS_ENV`] when `None`.
/// Only the first call has any effect.
pub fn init_workers(n: Option<usize>) {
    INIT.call_once(|| {
        let n = n.or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()));
        if let Some(n) = n.filter(|&n| n > 0) {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size worker pool: {e}");
            }
        }
    });
}

pub fn workers() -> usize {
    init_workers(None);
    rayon::current_num_threads()
}

/// Applies `f` to every item; output order matches input order regardless of
/// the worker count.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    init_workers(None);
    items.par_iter().map(f).collect()
}
