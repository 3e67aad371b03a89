//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (the default) work is spread over the rayon
//! pool. Without it, or with [`Exec::Sequential`], the same closures run in
//! order on the calling thread. Results are identical either way: every
//! item is computed independently and collected in input order.

/// Execution strategy for sweeps and Monte Carlo batches.
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

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Like [`map_range`] but gives each worker a reusable scratch value.
pub fn map_range_init<S, R, I, F>(exec: Exec, n: usize, init: I, f: F) -> Vec<R>
where
    R: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map_init(&init, |s, i| f(s, i)).collect()
        }
        _ => {
            let mut scratch = init();
            (0..n).map(|i| f(&mut scratch, i)).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_strategies_agree() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let a = map(Exec::Sequential, &xs, |x| x.sqrt());
        let b = map(Exec::Parallel, &xs, |x| x.sqrt());
        assert_eq!(a, b);
        let c = map_range_init(Exec::Parallel, 50, Vec::<f64>::new, |buf, i| {
            buf.push(i as f64);
            i * 2
        });
        assert_eq!(c, (0..50).map(|i| i * 2).collect::<Vec<_>>());
    }
}
