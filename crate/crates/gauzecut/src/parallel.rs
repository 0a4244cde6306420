//! Deterministic fork-join map over a slice.
//!
//! Policy rollouts, grasp candidates, and Monte-Carlo trials are all
//! embarrassingly parallel and must produce results that do not depend on the
//! worker count. Each item is a pure function of its inputs, so it suffices to
//! partition the index space into contiguous chunks and write results by
//! index; the merged output is identical for any `threads >= 1`.

/// Apply `f` to every element, using up to `threads` scoped worker threads.
///
/// `f(i, &items[i])` must be a pure function of its arguments for the
/// determinism guarantee to hold. `threads == 0` is treated as 1.
pub fn map_indexed<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads <= 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }

    let mut out: Vec<Option<R>> = Vec::with_capacity(items.len());
    out.resize_with(items.len(), || None);

    // Contiguous chunks, sized so every worker gets within one item of equal
    // share; slot chunks line up with item chunks index-for-index.
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let fref = &f;
        let mut rest: &mut [Option<R>] = &mut out;
        let mut start = 0usize;
        while start < items.len() {
            let len = chunk.min(items.len() - start);
            let (slots, tail) = rest.split_at_mut(len);
            rest = tail;
            let base = start;
            scope.spawn(move || {
                for (k, slot) in slots.iter_mut().enumerate() {
                    *slot = Some(fref(base + k, &items[base + k]));
                }
            });
            start += len;
        }
    });

    out.into_iter().map(|r| r.expect("worker filled slot")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_sequential_for_any_thread_count() {
        let items: Vec<u64> = (0..103).collect();
        let expect: Vec<u64> = items.iter().map(|x| x * x + 1).collect();
        for threads in [1, 2, 3, 4, 7, 64] {
            let got = map_indexed(&items, threads, |_, x| x * x + 1);
            assert_eq!(got, expect, "threads={threads}");
        }
    }

    #[test]
    fn empty_and_singleton() {
        let empty: Vec<u32> = vec![];
        assert!(map_indexed(&empty, 4, |_, x| *x).is_empty());
        assert_eq!(map_indexed(&[5u32], 4, |i, x| (i, *x)), vec![(0, 5)]);
    }
}
