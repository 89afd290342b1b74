//! Scoped, pool-free parallelism with a deterministic reduction order.
//!
//! Work is split into contiguous index spans whose number depends only on the
//! configured thread count, each span is processed by one worker, and partial
//! results are merged serially in span order. At a fixed thread count every
//! floating-point sum is therefore performed in a fixed order and runs are
//! bit-reproducible.

use std::ops::Range;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "FILTRATION_THREADS";

/// Number of worker threads: `FILTRATION_THREADS` if set to a positive
/// integer, otherwise the machine's available parallelism.
pub fn thread_count() -> usize {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        if let Ok(k) = raw.trim().parse::<usize>() {
            if k >= 1 {
                return k.min(512);
            }
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Splits `0..n` into at most `parts` non-empty contiguous spans with
/// approximately equal total `cost` (cost of index `i` given by `cost(i)`).
pub fn balanced_spans(n: usize, parts: usize, cost: impl Fn(usize) -> f64) -> Vec<Range<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let parts = parts.max(1).min(n);
    let total: f64 = (0..n).map(&cost).sum();
    let target = total / parts as f64;
    let mut spans = Vec::with_capacity(parts);
    let mut start = 0usize;
    let mut acc = 0.0f64;
    for i in 0..n {
        acc += cost(i);
        let remaining_parts = parts - spans.len();
        // Close the span at the target, but never leave more spans than
        // indices behind.
        if spans.len() + 1 < parts
            && (acc >= target * (spans.len() + 1) as f64 || n - i - 1 <= remaining_parts - 1)
        {
            spans.push(start..i + 1);
            start = i + 1;
        }
    }
    spans.push(start..n);
    spans
}

/// Runs `work` over each span on its own scoped thread and returns the
/// results in span order. A single span is executed inline.
pub fn run_spans<T, F>(spans: Vec<Range<usize>>, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    if spans.len() <= 1 {
        return spans.into_iter().map(&work).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = spans
            .into_iter()
            .map(|span| scope.spawn(|| work(span)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}
