//! Indexed parallel map.
//!
//! Work items (chains, replicates) are addressed by index and draw their
//! randomness from index-keyed streams, so any executor that returns results
//! in index order gives identical output.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// `(0..n).map(f)`, possibly evaluated concurrently, in index order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
