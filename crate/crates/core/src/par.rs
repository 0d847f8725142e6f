//! Data-parallel helpers with a sequential fallback.
//!
//! All helpers preserve index order in their output, so any reduction the caller does
//! afterwards is independent of how work was scheduled.

use crate::rng::{self, StreamRng};

/// Environment variable bounding the worker pool (0 or unset = automatic).
pub const THREADS_ENV: &str = "PR_KACZMARZ_THREADS";

/// Samples per Monte-Carlo chunk. Each chunk owns one random stream.
pub const MC_CHUNK: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Serial,
    /// Runs on the ambient rayon pool. Falls back to serial without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Serial
        }
    }
}

/// Thread bound requested through [`THREADS_ENV`]; `None` means automatic.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}

/// `(0..len).map(f)` in order, possibly in parallel.
pub fn map_indexed<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        _ => (0..len).map(f).collect(),
    }
}

/// Splits `total` samples into chunks of at most `chunk` and evaluates `f(rng, count)` for
/// each, where `rng` is the substream of `seed` tagged with the chunk index. Results are
/// returned in chunk order.
pub fn chunked<T, F>(exec: Execution, total: usize, chunk: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, usize) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = total.div_ceil(chunk);
    map_indexed(exec, n_chunks, |c| {
        let count = chunk.min(total - c * chunk);
        let mut rng = rng::substream(seed, c as u64);
        f(&mut rng, count)
    })
}

/// Runs `op` on a pool with `threads` workers, or on the calling thread when the
/// `parallel` feature is off.
pub fn with_threads<R: Send>(threads: Option<usize>, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if let Some(t) = threads {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(t).build() {
                return pool.install(op);
            }
        }
        op()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        op()
    }
}
