//! Index-ordered data-parallel helpers.
//!
//! With the `parallel` feature the `*_indexed` functions fan out over the
//! current rayon pool; without it they run sequentially. The `seq` variants
//! are always sequential so both paths can be benchmarked side by side.

macro_rules! if_rayon {
    ($rayon_value: expr, $else_value: expr) => {{
        #[cfg(feature = "parallel")]
        {
            ($rayon_value)
        }
        #[cfg(not(feature = "parallel"))]
        {
            ($else_value)
        }
    }};
}

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..n`, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if_rayon!(
        (0..n).into_par_iter().map(f).collect(),
        map_indexed_seq(n, f)
    )
}

pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Applies `f` to consecutive `chunk`-sized mutable slices of `out`, passing
/// the chunk index. Chunk boundaries do not depend on the thread count.
pub fn for_each_chunk_mut<T, F>(out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    if_rayon!(
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c)),
        for_each_chunk_mut_seq(out, chunk, f)
    )
}

pub fn for_each_chunk_mut_seq<T, F>(out: &mut [T], chunk: usize, f: F)
where
    F: Fn(usize, &mut [T]),
{
    for (i, c) in out.chunks_mut(chunk.max(1)).enumerate() {
        f(i, c);
    }
}

/// Whether this build fans work out over rayon.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
