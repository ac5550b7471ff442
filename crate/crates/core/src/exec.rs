//! Data-parallel map over replicate indices with a sequential fallback.
//!
//! Results always come back in index order, so downstream aggregation is
//! identical for every execution mode and thread count.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Rayon pool; `threads = None` uses the global pool. Without the
    /// `parallel` feature this runs sequentially.
    Parallel {
        threads: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel { threads: None }
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Parallel execution capped by the `BEST_SUBSET_THREADS` variable when set.
    pub fn from_env() -> Self {
        let threads = std::env::var("BEST_SUBSET_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&t| t > 0);
        match threads {
            Some(1) => Execution::Sequential,
            Some(t) => Execution::Parallel { threads: Some(t) },
            None => Execution::default(),
        }
    }

    pub fn map<T, F>(self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..count).map(f).collect(),
            Execution::Parallel { threads } => parallel_map(threads, count, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(threads: Option<usize>, count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let run = || (0..count).into_par_iter().map(&f).collect();
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(_threads: Option<usize>, count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let f = |i: u64| i * i;
        let seq = Execution::Sequential.map(1000, f);
        let par = Execution::Parallel { threads: Some(3) }.map(1000, f);
        let global = Execution::Parallel { threads: None }.map(1000, f);
        assert_eq!(seq, par);
        assert_eq!(seq, global);
        assert_eq!(seq[999], 999 * 999);
    }
}
