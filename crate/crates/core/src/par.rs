//! Data-parallel helpers. With the `parallel` feature the loops run on the
//! rayon pool; without it they fall back to plain sequential iteration.
//! Every helper writes each output element from exactly one closure call,
//! so results do not depend on the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(chunk_index, chunk)` for every `chunk_len`-sized chunk of `out`.
pub fn for_each_chunk_mut<T, F>(out: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// `(0..n).map(f).collect()`, possibly in parallel, order preserved.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}

/// Fallible variant of [`map_range`]; the first error in index order wins.
pub fn try_map_range<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    let results = map_range(n, f);
    results.into_iter().collect()
}

/// Pairwise (cascade) summation of `value(i)` for `i in 0..n` in a fixed
/// order. Deterministic and with O(log n) error growth.
pub fn pairwise_sum<F: Fn(usize) -> f64>(n: usize, value: F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, value: &F) -> f64 {
        if hi - lo <= 16 {
            let mut s = 0.0;
            for i in lo..hi {
                s += value(i);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, value) + rec(mid, hi, value)
        }
    }
    if n == 0 {
        0.0
    } else {
        rec(0, n, &value)
    }
}

pub fn sum(values: &[f64]) -> f64 {
    pairwise_sum(values.len(), |i| values[i])
}

/// Caps the global worker pool. A no-op without the `parallel` feature.
pub fn init_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let s = pairwise_sum(1000, |i| i as f64);
        assert_eq!(s, 499_500.0);
        assert_eq!(pairwise_sum(0, |_| 1.0), 0.0);
    }

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(100, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
