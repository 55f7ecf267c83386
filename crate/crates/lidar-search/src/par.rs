//! Data-parallel helpers behind the `parallel` feature.
//!
//! `map_collect` fans out over rayon when the feature is enabled and falls
//! back to a plain iterator otherwise. Both paths preserve input order, so
//! results are bit-identical regardless of the feature or thread count.
//! Reductions that matter for determinism (batch gradient sums) chunk their
//! input at fixed boundaries and fold the chunks in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Order-preserving map, parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Sequential reference path, independent of the feature flag. Benches use
/// this as the baseline the parallel path is compared against.
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Order-preserving indexed map over `0..n`.
#[cfg(feature = "parallel")]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Sequential counterpart of [`map_range`].
pub fn map_range_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Number of fixed chunks used for deterministic parallel reductions.
/// A constant (rather than the live thread count) keeps floating-point
/// summation order identical on every machine.
pub const REDUCE_CHUNKS: usize = 8;

/// Splits `0..n` into up to [`REDUCE_CHUNKS`] contiguous ranges.
pub fn fixed_chunks(n: usize) -> Vec<std::ops::Range<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let chunks = REDUCE_CHUNKS.min(n);
    let base = n / chunks;
    let extra = n % chunks;
    let mut out = Vec::with_capacity(chunks);
    let mut start = 0;
    for i in 0..chunks {
        let len = base + usize::from(i < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_collect_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let par = map_collect(&items, |x| x * 3);
        let seq = map_collect_seq(&items, |x| x * 3);
        assert_eq!(par, seq);
    }

    #[test]
    fn fixed_chunks_cover_range() {
        for n in [0usize, 1, 5, 8, 9, 100] {
            let chunks = fixed_chunks(n);
            let total: usize = chunks.iter().map(|r| r.len()).sum();
            assert_eq!(total, n);
            let mut next = 0;
            for r in &chunks {
                assert_eq!(r.start, next);
                assert!(!r.is_empty());
                next = r.end;
            }
        }
    }
}
