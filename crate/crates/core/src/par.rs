//! Execution-mode dispatch between rayon data parallelism and a plain
//! sequential fallback. With the `parallel` feature disabled everything
//! runs sequentially regardless of the requested mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    #[default]
    Parallel,
    Sequential,
}

impl ExecMode {
    pub fn is_parallel(self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self == ExecMode::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_range<U, F>(mode: ExecMode, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Applies `f` to disjoint chunks of `data`; `f` receives the chunk index.
pub fn for_each_chunk_mut<T, F>(mode: ExecMode, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    debug_assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = mode;
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let a = map_range(ExecMode::Parallel, 100, |i| i * i);
        let b = map_range(ExecMode::Sequential, 100, |i| i * i);
        assert_eq!(a, b);

        let mut x = vec![0u64; 64];
        let mut y = vec![0u64; 64];
        for_each_chunk_mut(ExecMode::Parallel, &mut x, 7, |i, c| {
            for (k, v) in c.iter_mut().enumerate() {
                *v = (i * 100 + k) as u64;
            }
        });
        for_each_chunk_mut(ExecMode::Sequential, &mut y, 7, |i, c| {
            for (k, v) in c.iter_mut().enumerate() {
                *v = (i * 100 + k) as u64;
            }
        });
        assert_eq!(x, y);
    }
}
