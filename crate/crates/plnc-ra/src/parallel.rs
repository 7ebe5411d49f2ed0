//! Deterministic data-parallel mapping over indexed Monte Carlo work items.
//!
//! Every work item derives its randomness from its own index, and results
//! are collected in index order, so the output is identical for any thread
//! count. With the `parallel` feature disabled everything runs sequentially.

/// Number of worker threads to use given an explicit request (0 = auto).
pub fn effective_threads(requested: usize) -> usize {
    if requested != 0 {
        return requested;
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let threads = effective_threads(threads);
    if threads <= 1 || count < 2 {
        return (0..count).map(f).collect();
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("failed to build worker pool");
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: usize, _threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    (0..count).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_canonical() {
        let seq = map_indexed(100, 1, |i| i * 3);
        let par = map_indexed(100, 4, |i| i * 3);
        assert_eq!(seq, par);
        assert_eq!(seq[10], 30);
    }

    #[test]
    fn effective_threads_resolves_auto() {
        assert!(effective_threads(0) >= 1);
        assert_eq!(effective_threads(3), 3);
    }
}
