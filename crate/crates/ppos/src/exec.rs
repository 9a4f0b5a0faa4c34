use ppos_core::exec::Executor;
use rayon::prelude::*;

use crate::error::{AppError, AppResult};

/// Executor backed by a dedicated rayon pool.
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// A pool of `workers` threads; 0 uses the number of available cores.
    pub fn new(workers: usize) -> AppResult<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| AppError::Config(format!("cannot start {} workers: {}", workers, e)))?;
        Ok(Pool { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
