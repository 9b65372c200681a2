//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these fan out over rayon's current
//! pool; without it they run the same closures in a plain loop. Reductions
//! always sum fixed-size blocks and fold the block partials in order, so the
//! result does not depend on the number of worker threads or on the feature.

/// Block length for reductions and flat elementwise maps.
pub const BLOCK: usize = 4096;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Runs `f(chunk_index, chunk)` over consecutive `chunk_len`-sized pieces of `out`.
pub fn for_each_chunk_mut<F>(out: &mut [f64], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(c, chunk)| f(c, chunk));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(c, chunk)| f(c, chunk));
}

/// Like [`for_each_chunk_mut`] but over two equally long outputs at once.
pub fn for_each_chunk_mut2<F>(a: &mut [f64], b: &mut [f64], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync + Send,
{
    debug_assert_eq!(a.len(), b.len());
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    a.par_chunks_mut(chunk_len)
        .zip(b.par_chunks_mut(chunk_len))
        .enumerate()
        .for_each(|(i, (x, y))| f(i, x, y));
    #[cfg(not(feature = "parallel"))]
    a.chunks_mut(chunk_len)
        .zip(b.chunks_mut(chunk_len))
        .enumerate()
        .for_each(|(i, (x, y))| f(i, x, y));
}

/// Like [`for_each_chunk_mut`] but over several equally long outputs at once.
pub fn for_each_chunk_mut3<F>(a: &mut [f64], b: &mut [f64], c: &mut [f64], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64], &mut [f64]) + Sync + Send,
{
    debug_assert!(a.len() == b.len() && b.len() == c.len());
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    a.par_chunks_mut(chunk_len)
        .zip(b.par_chunks_mut(chunk_len))
        .zip(c.par_chunks_mut(chunk_len))
        .enumerate()
        .for_each(|(i, ((x, y), z))| f(i, x, y, z));
    #[cfg(not(feature = "parallel"))]
    a.chunks_mut(chunk_len)
        .zip(b.chunks_mut(chunk_len))
        .zip(c.chunks_mut(chunk_len))
        .enumerate()
        .for_each(|(i, ((x, y), z))| f(i, x, y, z));
}

/// Deterministic blocked sum of `f(range)` over `0..len`.
pub fn sum_blocks<F>(len: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync + Send,
{
    let blocks = len.div_ceil(BLOCK);
    let block = |b: usize| f(b * BLOCK..((b + 1) * BLOCK).min(len));
    #[cfg(feature = "parallel")]
    let partials: Vec<f64> = (0..blocks).into_par_iter().map(block).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<f64> = (0..blocks).map(block).collect();
    partials.into_iter().sum()
}

/// Maximum of `f(range)` over blocks of `0..len`; `f64::NEG_INFINITY` when empty.
pub fn max_blocks<F>(len: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync + Send,
{
    let blocks = len.div_ceil(BLOCK);
    let block = |b: usize| f(b * BLOCK..((b + 1) * BLOCK).min(len));
    #[cfg(feature = "parallel")]
    let partials: Vec<f64> = (0..blocks).into_par_iter().map(block).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<f64> = (0..blocks).map(block).collect();
    partials.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Maps `f` over `0..n` and collects in order.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}

/// Runs `f` on a dedicated pool with `threads` workers.
///
/// Without the `parallel` feature this simply calls `f`.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
        {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// Number of workers the current pool would use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();
    #[cfg(not(feature = "parallel"))]
    return 1;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocked_sum_is_independent_of_thread_count() {
        let data: Vec<f64> = (0..50_000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 + 1e-9).collect();
        let s1 = with_threads(1, || sum_blocks(data.len(), |r| data[r].iter().sum()));
        let s4 = with_threads(4, || sum_blocks(data.len(), |r| data[r].iter().sum()));
        assert_eq!(s1.to_bits(), s4.to_bits());
    }

    #[test]
    fn empty_reductions() {
        assert_eq!(sum_blocks(0, |_| 1.0), 0.0);
        assert_eq!(max_blocks(0, |_| 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn chunks_see_their_index() {
        let mut v = vec![0.0; 10];
        for_each_chunk_mut(&mut v, 3, |c, chunk| chunk.iter_mut().for_each(|x| *x = c as f64));
        assert_eq!(v, vec![0., 0., 0., 1., 1., 1., 2., 2., 2., 3.]);
    }
}
