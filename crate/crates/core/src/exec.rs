//! Data-parallel helpers. With the `parallel` feature (on by default) work is
//! spread over rayon; without it every call runs sequentially. Output order
//! always matches input order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Whether parallel execution is compiled in.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Maps `f` over `items` on the global pool.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_with(Execution::Parallel, 0, items, f)
}

/// Maps `f` over `items` using at most `threads` workers (0 = rayon default).
pub fn map_with<T, R, F>(execution: Execution, threads: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if execution == Execution::Sequential || threads == 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    parallel_map(threads, items, f)
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(threads: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;

    if threads == 0 {
        return items.par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("could not build a {threads}-thread pool ({e}); running sequentially");
            items.iter().map(f).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(_threads: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_both_modes() {
        let items: Vec<u64> = (0..1000).collect();
        let want: Vec<u64> = items.iter().map(|x| x * x).collect();
        assert_eq!(map_with(Execution::Parallel, 4, &items, |x| x * x), want);
        assert_eq!(map_with(Execution::Sequential, 4, &items, |x| x * x), want);
        assert_eq!(map(&items, |x| x * x), want);
    }
}
