//! How robots (within a step) and runs (within a sweep) are spread over
//! threads. Results never depend on the choice: every random draw happens
//! on the coordinating thread and outputs are collected in index order.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Sequential,
    /// Rayon pool with this many workers. Without the `parallel` feature
    /// this behaves like `Sequential`.
    Parallel { workers: usize },
}

pub const THREADS_ENV: &str = "SWARMLANG_THREADS";

impl Schedule {
    /// Parallel with the worker count capped by `SWARMLANG_THREADS` when set.
    pub fn from_env() -> Self {
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        let workers = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .map_or(available, |cap| cap.min(available));
        Self::with_workers(workers)
    }

    pub fn with_workers(workers: usize) -> Self {
        if workers <= 1 {
            Self::Sequential
        } else {
            Self::Parallel { workers }
        }
    }

    pub fn workers(self) -> usize {
        match self {
            Self::Sequential => 1,
            Self::Parallel { workers } => workers,
        }
    }

    /// Runs `f` inside a pool sized for this schedule. Stepping a
    /// `Simulation` by hand outside of `install` uses rayon's global pool.
    #[cfg(feature = "parallel")]
    pub fn install<R: Send>(self, f: impl FnOnce() -> R + Send) -> R {
        match self {
            Self::Sequential => f(),
            Self::Parallel { workers } => match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                Ok(pool) => pool.install(f),
                Err(_) => f(),
            },
        }
    }

    #[cfg(not(feature = "parallel"))]
    pub fn install<R: Send>(self, f: impl FnOnce() -> R + Send) -> R {
        f()
    }

    /// Applies `f` to every item, possibly in parallel.
    pub(crate) fn for_each_mut<T: Send>(self, items: &mut [T], f: impl Fn(usize, &mut T) + Sync + Send) {
        #[cfg(feature = "parallel")]
        if let Self::Parallel { .. } = self {
            use rayon::prelude::*;
            items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
            return;
        }
        items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
    }

    /// Maps `f` over `items`, keeping input order in the output.
    pub(crate) fn map<T: Sync, R: Send>(self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        #[cfg(feature = "parallel")]
        if let Self::Parallel { .. } = self {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}
