use rayon::prelude::*;

use super::PathSeed;
use crate::error::{Error, Result};

/// Evaluates `per_path` for path indices `0..n_paths` in parallel.
///
/// Results come back in index order, so any fold over them is independent
/// of how rayon scheduled the work. Blowup errors are tagged with the
/// failing path's index and master seed for replay.
pub fn run_paths<T, F>(n_paths: usize, master_seed: u64, per_path: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(PathSeed) -> Result<T> + Sync + Send,
{
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| per_path(PathSeed::new(master_seed, i)).map_err(|e| e.with_path(i, master_seed)))
        .collect()
}

/// Runs `op` inside a dedicated pool of `workers` threads.
pub fn with_workers<T, F>(workers: usize, op: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> Result<T> + Send,
{
    if workers == 0 {
        return Err(Error::invalid("worker count must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
    pool.install(op)
}
