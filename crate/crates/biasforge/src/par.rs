//! Data-parallel map over independent work items.
//!
//! With the default `parallel` feature the map runs on a rayon pool whose
//! width is capped by the `BIASFORGE_THREADS` environment variable; without
//! the feature it degrades to the serial loop. Results come back in input
//! order either way, so downstream output is schedule-independent.

/// Worker-cap environment variable.
pub const THREADS_ENV: &str = "BIASFORGE_THREADS";

/// Serial reference implementation; also the benchmark baseline.
pub fn map_serial<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
mod imp {
    use std::sync::OnceLock;

    fn pool() -> &'static rayon::ThreadPool {
        static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
        POOL.get_or_init(|| {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = std::env::var(super::THREADS_ENV)
                .ok()
                .and_then(|v| v.parse::<usize>().ok())
                .filter(|&n| n > 0)
            {
                builder = builder.num_threads(n);
            }
            builder.build().expect("worker pool construction")
        })
    }

    pub fn map<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
    where
        F: Fn(&T) -> U + Sync + Send,
    {
        use rayon::prelude::*;
        pool().install(|| items.par_iter().map(f).collect())
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
    where
        F: Fn(&T) -> U + Sync + Send,
    {
        super::map_serial(items, f)
    }
}

/// Map `f` over `items`, preserving input order in the output.
pub fn map<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    imp::map(items, f)
}
