//! Row-parallel helpers. With the `parallel` feature these fan out over the
//! rayon pool; without it they run the same closures in order. Every closure
//! owns one output row, so results do not depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(row_index, row)` for every `width`-sized row of `data`.
pub(crate) fn for_each_row<F>(data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Send + Sync,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(width)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Maps `0..n` through `f`, keeping index order in the output.
pub(crate) fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
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

/// Fills the upper triangle of an `n x n` row-major buffer with `f(m, row_tail)`
/// where `row_tail` covers columns `m..n`, then mirrors it into the lower
/// triangle. The result is symmetric bit for bit.
pub(crate) fn symmetric_fill<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Send + Sync,
{
    let mut data = vec![0.0; n * n];
    for_each_row(&mut data, n, |m, row| f(m, &mut row[m..]));
    for m in 1..n {
        for k in 0..m {
            data[m * n + k] = data[k * n + m];
        }
    }
    data
}
