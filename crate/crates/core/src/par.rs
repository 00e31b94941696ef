//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) [`Mode::Parallel`] fans work
//! out over rayon; without it every call runs sequentially. Results always
//! come back in input order, so callers see the same output in either mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    #[default]
    Parallel,
}

impl Mode {
    /// Whether this mode actually runs in parallel in the current build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Mode::Parallel
    }
}

pub fn map<T, R, F>(mode: Mode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

pub fn try_map<T, R, E, F>(mode: Mode, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Runs `f` with at most `threads` workers available to nested [`map`] calls.
/// Used to bound concurrent requests against remote services.
pub fn bounded<R, F>(mode: Mode, threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = (mode, threads);
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let seq = map(Mode::Sequential, &xs, |x| x * x);
        let par = map(Mode::Parallel, &xs, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[10], 100);
    }

    #[test]
    fn try_map_propagates_error() {
        let xs = [1, 2, 3];
        let r: Result<Vec<i32>, String> =
            try_map(Mode::Parallel, &xs, |&x| if x == 2 { Err("two".to_string()) } else { Ok(x) });
        assert_eq!(r.unwrap_err(), "two");
    }

    #[test]
    fn bounded_runs_closure() {
        let xs: Vec<u32> = (0..64).collect();
        let out = bounded(Mode::Parallel, 2, || map(Mode::Parallel, &xs, |x| x + 1));
        assert_eq!(out.len(), 64);
        assert_eq!(out[63], 64);
    }
}
