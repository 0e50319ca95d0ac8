//! Fan-out of independent indexed work units.
//!
//! Monte Carlo loops in this crate are written as pure functions of an index
//! whose randomness comes from [`crate::rng::RngStream`]. An executor only
//! decides where those functions run, so every implementation must return
//! exactly what [`Sequential`] returns.

use alloc::vec::Vec;

pub trait Executor {
    /// `(0..n).map(f)` in index order.
    fn map(&self, n: u64, f: &(dyn Fn(u64) -> u64 + Sync)) -> Vec<u64>;

    /// `(0..n).map(f).sum()`.
    fn sum(&self, n: u64, f: &(dyn Fn(u64) -> u64 + Sync)) -> u64 {
        self.map(n, f).iter().sum()
    }
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map(&self, n: u64, f: &(dyn Fn(u64) -> u64 + Sync)) -> Vec<u64> {
        (0..n).map(f).collect()
    }

    fn sum(&self, n: u64, f: &(dyn Fn(u64) -> u64 + Sync)) -> u64 {
        (0..n).map(f).sum()
    }
}
