//! Deterministic data-parallel helpers.
//!
//! Work over `0..n` is cut into chunks of a fixed size. Each chunk is reduced
//! sequentially and chunk results are combined in chunk order. The chunk
//! boundaries never depend on the thread count, so every reduction returns the
//! same bits whether it runs on the rayon pool or on the sequential fallback.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Default chunk length for node/sample loops.
pub const CHUNK: usize = 2048;

/// Applies `f` to each chunk of `0..n` and returns the results in chunk order.
pub fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let chunks = n.div_ceil(chunk);
    let range = move |c: usize| c * chunk..((c + 1) * chunk).min(n);
    if chunks <= 1 {
        return (0..chunks).map(|c| f(range(c))).collect();
    }
    #[cfg(feature = "parallel")]
    {
        (0..chunks).into_par_iter().map(|c| f(range(c))).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chunks).map(|c| f(range(c))).collect()
    }
}

/// Maps every index independently, preserving order.
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// `Σ_{i<n} f(i)` with fixed-chunk summation.
pub fn sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_chunks(n, CHUNK, |r| r.map(&f).sum::<f64>()).into_iter().sum()
}

/// Componentwise `Σ_{i<n} f(i, out)` where `f` accumulates into a `width`-long buffer.
pub fn sum_vec<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let partials = map_chunks(n, CHUNK, |r| {
        let mut acc = vec![0.0; width];
        for i in r {
            f(i, &mut acc);
        }
        acc
    });
    let mut total = vec![0.0; width];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Number of worker threads the parallel helpers will use.
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_sequential() {
        let n: usize = 10_007;
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let direct: f64 = {
            let mut total = 0.0;
            for c in 0..n.div_ceil(CHUNK) {
                total += (c * CHUNK..((c + 1) * CHUNK).min(n)).map(f).sum::<f64>();
            }
            total
        };
        assert_eq!(sum(n, f).to_bits(), direct.to_bits());
    }

    #[test]
    fn map_preserves_order() {
        let v = map(100, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(sum(0, |_| 1.0), 0.0);
        assert_eq!(sum_vec(0, 3, |_, _| {}), vec![0.0; 3]);
    }
}
