use rarefaction_core::exec::Executor;
use rayon::prelude::*;

/// Runs work units on the current rayon pool. Results come back in index
/// order, so output does not depend on the number of threads.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map(&self, n: u64, f: &(dyn Fn(u64) -> u64 + Sync)) -> Vec<u64> {
        (0..n).into_par_iter().map(f).collect()
    }

    fn sum(&self, n: u64, f: &(dyn Fn(u64) -> u64 + Sync)) -> u64 {
        (0..n).into_par_iter().map(f).sum()
    }
}
