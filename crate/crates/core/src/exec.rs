//! Work scheduling for the data-parallel passes.
//!
//! Every parallel loop in the crate goes through [`Executor`]. With the
//! `parallel` feature it dispatches onto a rayon pool (either a dedicated
//! pool of a fixed size or the global one); without it, or with
//! `Executor::serial()`, the same closures run on the calling thread in
//! index order.

#[cfg(feature = "parallel")]
use std::sync::Arc;

use crate::error::Result;
#[cfg(feature = "parallel")]
use crate::error::Error;

/// Environment variable consulted when no explicit worker count is given.
pub const THREADS_ENV: &str = "GSVOL_THREADS";

#[derive(Clone)]
pub struct Executor {
    threads: usize,
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("threads", &self.threads)
            .finish()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::global()
    }
}

impl Executor {
    /// Runs everything on the calling thread.
    pub fn serial() -> Self {
        Executor {
            threads: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// Uses the global rayon pool (or serial execution without the
    /// `parallel` feature).
    pub fn global() -> Self {
        #[cfg(feature = "parallel")]
        {
            Executor {
                threads: rayon::current_num_threads(),
                pool: None,
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Self::serial()
        }
    }

    /// Dedicated pool with exactly `threads` workers. `threads == 1` is
    /// serial execution.
    pub fn with_threads(threads: usize) -> Result<Self> {
        if threads <= 1 {
            return Ok(Self::serial());
        }
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::ThreadPool(e.to_string()))?;
            Ok(Executor {
                threads,
                pool: Some(Arc::new(pool)),
            })
        }
        #[cfg(not(feature = "parallel"))]
        {
            Ok(Self::serial())
        }
    }

    /// Resolves an optional CLI value, falling back to `GSVOL_THREADS` and
    /// then to the available parallelism.
    pub fn from_request(threads: Option<usize>) -> Result<Self> {
        let env = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok());
        match threads.or(env) {
            Some(n) => Self::with_threads(n),
            None => {
                let n = std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1);
                Self::with_threads(n)
            }
        }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn is_serial(&self) -> bool {
        self.threads <= 1
    }

    /// Evaluates `f(i)` for `i in 0..n` and returns the results in index
    /// order regardless of scheduling.
    pub fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if !self.is_serial() {
            use rayon::prelude::*;
            let run = || (0..n).into_par_iter().map(&f).collect::<Vec<_>>();
            return match &self.pool {
                Some(pool) => pool.install(run),
                None => run(),
            };
        }
        (0..n).map(f).collect()
    }

    /// Folds `0..n` into per-worker accumulators and combines them. The
    /// combination order depends on scheduling, so floating-point results
    /// may differ between runs when more than one worker is active.
    pub fn fold_reduce<A, I, F, C>(&self, n: usize, init: I, fold: F, combine: C) -> A
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(A, usize) -> A + Sync + Send,
        C: Fn(A, A) -> A + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if !self.is_serial() {
            use rayon::prelude::*;
            let run = || {
                (0..n)
                    .into_par_iter()
                    .fold(&init, &fold)
                    .reduce(&init, &combine)
            };
            return match &self.pool {
                Some(pool) => pool.install(run),
                None => run(),
            };
        }
        let _ = &combine;
        (0..n).fold(init(), fold)
    }
}
