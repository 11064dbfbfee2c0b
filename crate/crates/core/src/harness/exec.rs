//! Job execution. With the `parallel` feature, independent jobs run on the
//! rayon pool; otherwise they run in order on the calling thread. Output
//! order always matches input order.

pub fn execute_sequential<T, R, F>(jobs: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    jobs.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn execute_parallel<T, R, F>(jobs: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    jobs.par_iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn execute<T, R, F>(jobs: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    execute_parallel(jobs, f)
}

#[cfg(not(feature = "parallel"))]
pub fn execute<T, R, F>(jobs: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    execute_sequential(jobs, f)
}
