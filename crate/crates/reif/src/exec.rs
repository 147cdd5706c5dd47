//! Thread-pool executor for the core batch contracts.

use rayon::prelude::*;
use reif_core::Executor;

/// Order-preserving parallel map on the current rayon pool.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

/// Runs `f` on a pool of `threads` workers (0 picks rayon's default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}), running on the global pool");
            f()
        }
    }
}
