//! Rayon-backed executor for the core sweeps.

use rayon::prelude::*;
use splitlocus_core::exec::Executor;

/// Runs independent jobs on the global rayon pool. Results keep their index
/// order, so outputs do not depend on the thread count.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}
