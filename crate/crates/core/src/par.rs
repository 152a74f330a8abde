//! Order-preserving parallel map. Results never depend on the thread count:
//! work items are evaluated independently and consumed in input order.

const BLOCK: usize = 1 << 15;

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

/// Evaluates `f` on every item and feeds the results to `sink` in input
/// order, holding at most one block of results in memory.
pub(crate) fn for_each_ordered<T, R, F, S>(items: &[T], f: F, mut sink: S)
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
    S: FnMut(R),
{
    for block in items.chunks(BLOCK) {
        for r in map(block, &f) {
            sink(r);
        }
    }
}
