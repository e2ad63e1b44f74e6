//! Chunked map/reduce over row-major blocks, parallel when the `parallel`
//! feature is on. Partial results are always combined in chunk order, so the
//! outcome does not depend on the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn fill_chunks<F>(data: &mut [f64], chunk_len: usize, fill: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| fill(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| fill(i, c));
}

pub(crate) fn map_chunks<T, F>(data: &[f64], chunk_len: usize, map: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return data.par_chunks(chunk_len).map(map).collect();
    #[cfg(not(feature = "parallel"))]
    return data.chunks(chunk_len).map(map).collect();
}

/// Parallel map over independent work items, results in input order.
pub(crate) fn map_items<I, T, F>(items: &[I], map: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return items.par_iter().map(map).collect();
    #[cfg(not(feature = "parallel"))]
    return items.iter().map(map).collect();
}
