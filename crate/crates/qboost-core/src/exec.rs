//! Data-parallel row mapping with a sequential fallback. The parallel path
//! preserves input order, so downstream serialization is byte-identical to
//! the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map over rows using the rayon pool when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Sequential build: same signature, plain iteration.
#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Always-sequential mapping, kept callable in every build for benchmarks
/// and for callers that need strict single-thread execution.
pub fn map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let xs: Vec<u64> = (0..257).collect();
        let f = |x: &u64| x.wrapping_mul(2654435761).rotate_left(7);
        assert_eq!(super::map(&xs, f), super::map_seq(&xs, f));
    }
}
