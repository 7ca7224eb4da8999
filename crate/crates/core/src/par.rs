//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper preserves input order in its output, so results are identical
//! whichever [`Execution`] mode is selected. Without the `parallel` feature
//! both modes run sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Whether work will actually be spread over the rayon pool. A pool of
    /// one thread runs inline, which skips the hand-off to the worker.
    pub fn is_parallel(self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self == Execution::Parallel && rayon::current_num_threads() > 1
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }
}

pub(crate) fn map_mut<T, R, F>(exec: Execution, items: &mut [T], f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items
            .par_iter_mut()
            .enumerate()
            .map(|(i, item)| f(i, item))
            .collect();
    }
    let _ = exec;
    items.iter_mut().enumerate().map(|(i, item)| f(i, item)).collect()
}

pub(crate) fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}
