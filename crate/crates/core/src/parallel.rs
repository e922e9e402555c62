//! Deterministic fan-out over per-example work.
//!
//! Results are always assembled in index order and each worker owns a
//! contiguous index range, so the output (and any reduction over it) is
//! bit-identical regardless of how many threads actually run. Thread count
//! comes from `MPDBM_THREADS` when set, otherwise from the machine.

use std::thread;

/// Number of worker threads to use.
pub fn thread_count() -> usize {
    if let Ok(v) = std::env::var("MPDBM_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            return n.max(1);
        }
    }
    thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Apply `f` to every index in `0..n` and collect results in index order.
///
/// `f` must be pure; outputs do not depend on the thread count, only the
/// wall time does.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = thread_count().min(n).max(1);
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let mut pieces: Vec<Vec<T>> = Vec::with_capacity(workers);
    thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = (0..workers)
            .map(|t| {
                let lo = t * n / workers;
                let hi = (t + 1) * n / workers;
                s.spawn(move || (lo..hi).map(f).collect::<Vec<T>>())
            })
            .collect();
        for h in handles {
            pieces.push(h.join().expect("worker panicked"));
        }
    });
    pieces.into_iter().flatten().collect()
}
