//! Shared-nothing replica orchestration.

use rayon::prelude::*;

use crate::aggregate::{merge_all, Aggregate};
use crate::error::{Error, Result};

/// Runs `body(i, &mut partial)` for every replica `i < n`, splitting the index
/// range into `workers` contiguous chunks, then merges the partials in chunk
/// order. Each replica must derive its randomness from `i` alone.
pub fn map_reduce<A, I, F>(n: u64, workers: usize, init: I, body: F) -> Result<A>
where
    A: Aggregate + Send,
    I: Fn() -> A + Sync,
    F: Fn(u64, &mut A) + Sync,
{
    let workers = workers.max(1);
    let chunk = n.div_ceil(workers as u64).max(1);
    let ranges: Vec<(u64, u64)> = (0..workers as u64)
        .map(|w| (w * chunk, ((w + 1) * chunk).min(n)))
        .filter(|(a, b)| a < b)
        .collect();
    let run = |&(a, b): &(u64, u64)| {
        let mut acc = init();
        for i in a..b {
            body(i, &mut acc);
        }
        acc
    };
    let partials: Vec<A> = if workers == 1 {
        ranges.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::usage(format!("cannot start {workers} workers: {e}")))?;
        pool.install(|| ranges.par_iter().map(run).collect())
    };
    merge_all(partials.into_iter(), init())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::StateCounts;

    #[test]
    fn worker_count_does_not_change_result() {
        let body = |i: u64, acc: &mut StateCounts| {
            let s = if i % 3 == 0 { None } else { Some(format!("0;{}", i % 4 + 1).parse().unwrap()) };
            acc.record(s);
        };
        let one = map_reduce(1000, 1, || StateCounts::new(9), body).unwrap();
        for w in [2, 3, 8] {
            assert_eq!(map_reduce(1000, w, || StateCounts::new(9), body).unwrap(), one);
        }
        assert_eq!(one.replicas, 1000);
        let none = map_reduce(0, 4, || StateCounts::new(9), body).unwrap();
        assert_eq!(none.replicas, 0);
    }
}
