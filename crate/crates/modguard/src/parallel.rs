//! Index-ordered parallel map over frames.
//!
//! Attack evaluation is embarrassingly parallel per frame with read-only
//! shared models. Results are collected by index, so the output is
//! identical for any worker count, including the serial path.

pub fn par_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let mut indexed: Vec<(usize, R)> = Vec::with_capacity(items.len());
    std::thread::scope(|scope| {
        let chunk = items.len().div_ceil(threads);
        let mut handles = Vec::new();
        for (t, slice) in items.chunks(chunk).enumerate() {
            let f = &f;
            handles.push(scope.spawn(move || {
                slice
                    .iter()
                    .enumerate()
                    .map(|(i, item)| (t * chunk + i, f(item)))
                    .collect::<Vec<_>>()
            }));
        }
        for h in handles {
            indexed.extend(h.join().expect("worker panicked"));
        }
    });
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, r)| r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_values_are_identical_across_thread_counts() {
        let items: Vec<u64> = (0..103).collect();
        let serial = par_map(&items, 1, |&v| v * v);
        for threads in [2, 3, 8] {
            assert_eq!(par_map(&items, threads, |&v| v * v), serial);
        }
        assert_eq!(serial.len(), 103);
        assert_eq!(serial[10], 100);
    }

    #[test]
    fn empty_input_is_fine() {
        let out: Vec<u32> = par_map(&[] as &[u32], 4, |&v| v);
        assert!(out.is_empty());
    }
}
