use rayon::prelude::*;
use std::ops::Range;

/// Replicates per work chunk. Fixed, so chunk boundaries and their random
/// streams do not depend on the number of worker threads.
pub(crate) const CHUNK: usize = 1024;

/// Runs `f(chunk_index, replicate_range)` over `0..n` in chunks of [`CHUNK`]
/// and returns the partial results in chunk order.
pub(crate) fn map_chunks<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            f(c, start..(start + CHUNK).min(n))
        })
        .collect()
}
