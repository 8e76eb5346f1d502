//! Data-parallel helpers.
//!
//! With the `parallel` feature these fan work out over the rayon pool;
//! without it they run sequentially. Results are always collected in index
//! order, so callers that reduce the returned vectors sequentially get the
//! same answer either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..n` and returns the results in order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
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

/// Maps fixed-size chunks of `data` (e.g. the rows of a row-major matrix).
pub fn map_chunks<S, T, F>(data: &[S], chunk: usize, f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&[S]) -> T + Sync + Send,
{
    if chunk == 0 {
        return Vec::new();
    }
    #[cfg(feature = "parallel")]
    {
        data.par_chunks(chunk).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks(chunk).map(f).collect()
    }
}

/// Applies `f(row_index, row)` to every `chunk`-sized mutable row.
pub fn for_each_chunk_mut<S, F>(data: &mut [S], chunk: usize, f: F)
where
    S: Send,
    F: Fn(usize, &mut [S]) + Sync + Send,
{
    if chunk == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
}

/// True when the crate was built with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
