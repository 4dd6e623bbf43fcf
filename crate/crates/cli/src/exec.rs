use std::ops::Range;

use islet_core::smc::BlockExecutor;
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// Runs the simulations of a block on a rayon pool. Results come back in
/// run-index order, so estimates do not depend on the thread count.
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            if n == 0 {
                return Err(CliError::config("thread count must be at least 1"));
            }
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| CliError::runtime(format!("cannot start worker threads: {e}")))?;
        Ok(Pool { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl BlockExecutor for Pool {
    fn map_runs<T, F>(&self, runs: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| runs.into_par_iter().map(f).collect())
    }
}

/// `--threads` wins over `ISLET_THREADS`; neither means one thread per core.
pub fn thread_count(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>> {
    match (flag, env) {
        (Some(n), _) => Ok(Some(n)),
        (None, Some(s)) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config(format!("ISLET_THREADS must be a positive integer (got {s:?})"))),
        _ => Ok(None),
    }
}
