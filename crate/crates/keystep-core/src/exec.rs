//! Ordered map helpers with an optional rayon backend.
//!
//! All data-parallel loops in this crate (per-take generation and loading,
//! graph building, batch prediction, cross-validation folds) go through
//! these helpers. Outputs are always collected in input order, so the
//! parallel and sequential paths produce identical results. Without the
//! `parallel` feature everything degrades to plain iteration.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when `parallel` is true and the
/// `parallel` feature is compiled in. `f` receives the item index.
pub fn maybe_par_map<T, U, F>(parallel: bool, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items
            .par_iter()
            .enumerate()
            .map(|(i, item)| f(i, item))
            .collect();
    }
    let _ = parallel;
    items.iter().enumerate().map(|(i, item)| f(i, item)).collect()
}

/// Fallible variant of [`maybe_par_map`]; the first error wins.
pub fn maybe_par_try_map<T, U, E, F>(parallel: bool, items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(usize, &T) -> Result<U, E> + Sync,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items
            .par_iter()
            .enumerate()
            .map(|(i, item)| f(i, item))
            .collect();
    }
    let _ = parallel;
    items.iter().enumerate().map(|(i, item)| f(i, item)).collect()
}

/// Map over indices `0..n`, parallel when requested and available.
pub fn maybe_par_map_indices<U, F>(parallel: bool, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..n).into_par_iter().map(|i| f(i)).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}
