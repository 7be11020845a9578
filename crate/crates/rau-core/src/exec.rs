//! Batch execution helpers.
//!
//! Per-example work (encoding, labeling, rewriting, per-example gradients) is
//! pure, so batches are mapped in parallel when the `parallel` feature is on.
//! Results are collected in input order, so reductions downstream stay
//! deterministic regardless of thread scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
/// Output order matches input order.
#[cfg(feature = "parallel")]
pub fn map_batch<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    items.par_iter().map(f).collect()
}

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
/// Output order matches input order.
#[cfg(not(feature = "parallel"))]
pub fn map_batch<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Always-sequential map over `items`. Kept public so benchmarks can compare
/// the parallel path against a sequential baseline within one build.
pub fn map_batch_seq<T, U, F: Fn(&T) -> U>(items: &[T], f: F) -> Vec<U> {
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_batch_preserves_order() {
        let items: Vec<usize> = (0..1000).collect();
        let out = map_batch(&items, |x| x * 2);
        let expected = map_batch_seq(&items, |x| x * 2);
        assert_eq!(out, expected);
    }
}
