/// How data-parallel loops are executed.
///
/// Without the `parallel` feature every variant runs sequentially. Results
/// never depend on the choice: work items are indexed and collected in index
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Run on a rayon pool. `threads == 0` uses the ambient pool; any other
    /// value installs a dedicated pool of that size at the entry point.
    #[default]
    Parallel,
    Threads(usize),
}

impl Execution {
    /// `--jobs N` style constructor: 1 means sequential, 0 means the default pool.
    pub fn from_jobs(jobs: usize) -> Self {
        match jobs {
            0 => Execution::Parallel,
            1 => Execution::Sequential,
            n => Execution::Threads(n),
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Execution::Sequential)
    }

    /// Map `f` over `0..n`, returning results in index order.
    pub(crate) fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Run `f` inside a dedicated pool when a thread count was requested.
    pub(crate) fn install<T, F>(self, f: F) -> T
    where
        T: Send,
        F: FnOnce() -> T + Send,
    {
        #[cfg(feature = "parallel")]
        if let Execution::Threads(n) = self {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                return pool.install(f);
            }
        }
        f()
    }
}
