//! Execution strategy for the data-parallel loops.
//!
//! With the `parallel` feature disabled every helper runs sequentially and
//! [`Execution::Parallel`] behaves like [`Execution::Sequential`].

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..len).map(f).collect()`, in index order regardless of execution.
pub fn map_range<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Applies `f` to every `chunk`-sized piece of `out`, passing the chunk index.
pub fn for_each_chunk_mut<T, F>(exec: Execution, out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Number of worker threads available to [`Execution::Parallel`].
pub fn num_threads(exec: Execution) -> usize {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return rayon::current_num_threads();
    }
    let _ = exec;
    1
}
