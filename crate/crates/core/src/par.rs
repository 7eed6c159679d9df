//! Order-preserving data parallelism. Results always come back in input
//! order, so reductions over them are independent of the thread count.

use std::ops::Range;

/// Rows per work unit. Fixed so that chunk boundaries, and therefore every
/// floating-point reduction, do not depend on the number of threads.
pub(crate) const CHUNK: usize = 16;

pub(crate) fn chunks(n: usize, size: usize) -> Vec<Range<usize>> {
    (0..n).step_by(size.max(1)).map(|s| s..(s + size).min(n)).collect()
}

#[cfg(feature = "parallel")]
pub(crate) fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
