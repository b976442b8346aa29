//! Data-parallel map/reduce over an index range, with a sequential build
//! when the `parallel` feature is off.
//!
//! `merge` must be associative and commutative for results to be independent
//! of the worker count.

#[cfg(feature = "parallel")]
pub(crate) fn map_reduce<S, A>(
    count: usize,
    threads: Option<usize>,
    init: impl Fn() -> S + Sync + Send,
    map: impl Fn(&mut S, usize) -> A + Sync + Send,
    identity: impl Fn() -> A + Sync + Send,
    merge: impl Fn(A, A) -> A + Sync + Send,
) -> A
where
    A: Send,
{
    use rayon::prelude::*;
    let run = || (0..count).into_par_iter().map_init(&init, &map).reduce(&identity, &merge);
    match threads {
        Some(k) if k > 0 => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                log::warn!("could not build a {k}-thread pool ({e}); using the global pool");
                run()
            }
        },
        _ => run(),
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_reduce<S, A>(
    count: usize,
    _threads: Option<usize>,
    init: impl Fn() -> S + Sync + Send,
    map: impl Fn(&mut S, usize) -> A + Sync + Send,
    identity: impl Fn() -> A + Sync + Send,
    merge: impl Fn(A, A) -> A + Sync + Send,
) -> A
where
    A: Send,
{
    let mut state = init();
    (0..count).fold(identity(), |acc, k| merge(acc, map(&mut state, k)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_count_does_not_change_result() {
        let run = |threads| map_reduce(1000, threads, || (), |_, k| (k as u64) * (k as u64), || 0u64, |a, b| a + b);
        let expect: u64 = (0..1000u64).map(|k| k * k).sum();
        assert_eq!(run(Some(1)), expect);
        assert_eq!(run(Some(4)), expect);
        assert_eq!(run(None), expect);
    }
}
