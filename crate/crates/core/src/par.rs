//! Data-parallel execution with a sequential fallback.
//!
//! Hot loops (word counting, per-word E-steps, batch encoding, correlation
//! cells) go through [`Exec`]. With the `parallel` feature enabled
//! [`Exec::Parallel`] runs on the rayon pool; without it, both variants run
//! sequentially. Every reduction used through this module is either an
//! ordered collect or an integer sum, so results do not depend on the
//! variant or on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Whether this build can actually run in parallel.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Order-preserving map.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Fold each chunk of `items` into an accumulator and merge the
    /// accumulators. `reduce` must be associative and commutative.
    pub fn fold_reduce<T, A, I, F, R>(self, items: &[T], init: I, fold: F, reduce: R) -> A
    where
        T: Sync,
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(A, &T) -> A + Sync + Send,
        R: Fn(A, A) -> A + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return items.par_iter().fold(&init, &fold).reduce(&init, &reduce);
        }
        let _ = &reduce;
        items.iter().fold(init(), fold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_agree() {
        let xs: Vec<u64> = (0..10_000).collect();
        for exec in [Exec::Sequential, Exec::Parallel] {
            let squares = exec.map(&xs, |x| x * x);
            assert_eq!(squares[9_999], 9_999 * 9_999);
            let total = exec.fold_reduce(&xs, || 0u64, |a, x| a + x, |a, b| a + b);
            assert_eq!(total, 9_999 * 10_000 / 2);
            assert_eq!(exec.map_range(5, |i| i * 2), vec![0, 2, 4, 6, 8]);
        }
    }
}
