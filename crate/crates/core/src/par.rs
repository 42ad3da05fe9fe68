//! Order-preserving parallel map helpers.
//!
//! With the `parallel` feature these dispatch to rayon; without it they
//! fall back to plain sequential iteration. Every call site computes its
//! output elements independently, so the two paths produce bit-identical
//! results — the feature only changes wall-clock time. The sequential
//! versions stay compiled in either configuration so benchmarks can
//! compare both.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, preserving index order in the output.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_range_seq(n, f)
    }
}

/// Sequential reference implementation of [`map_range`].
pub fn map_range_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Map `f` over a slice, preserving order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_slice_seq(items, f)
    }
}

/// Sequential reference implementation of [`map_slice`].
pub fn map_slice_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_matches_sequential() {
        let par = map_range(100, |i| i * i + 1);
        let seq = map_range_seq(100, |i| i * i + 1);
        assert_eq!(par, seq);
    }

    #[test]
    fn map_slice_preserves_order() {
        let xs: Vec<f64> = (0..57).map(|i| i as f64 * 0.5).collect();
        let par = map_slice(&xs, |x| x.exp());
        let seq = map_slice_seq(&xs, |x| x.exp());
        assert_eq!(par, seq);
    }
}
