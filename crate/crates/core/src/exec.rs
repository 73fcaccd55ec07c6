//! Execution strategy for the data-parallel loops (Monte Carlo trials, oracle
//! grid points, Jacobi updates).
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] fans
//! work out over the rayon global pool. Without it, every mode runs the
//! sequential path. Results are always collected in index order, so the
//! output of a computation never depends on the mode.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this mode will actually use worker threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f(i)` for `i in 0..len` and returns the results in index
    /// order.
    pub fn map_indexed<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Evaluates `f(i)` for `i in 0..len` and reduces the `Some` results
    /// with `pick`, which must be associative and commutative for the
    /// result to be independent of the mode.
    pub fn reduce_indexed<T, F, P>(self, len: usize, f: F, pick: P) -> Option<T>
    where
        T: Send,
        F: Fn(usize) -> Option<T> + Sync + Send,
        P: Fn(T, T) -> T + Sync + Send,
    {
        let merge = |a: Option<T>, b: Option<T>| match (a, b) {
            (Some(a), Some(b)) => Some(pick(a, b)),
            (a, None) => a,
            (None, b) => b,
        };
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).reduce(|| None, merge);
        }
        (0..len).map(f).fold(None, merge)
    }
}
