//! Artifacts: the explicit anisotropic forms, descent transcripts, lemma
//! sweeps, the Γ* experiment and the acceptance reproductions.

pub mod descent;
pub mod gamma;
pub mod paper_forms;
pub mod reproduce;
pub mod sweeps;

/// Environment variable read when no thread count is given.
pub const THREADS_ENV: &str = "PADIC_FORMS_THREADS";

/// A rayon pool sized by `threads`, else by `PADIC_FORMS_THREADS`, else by
/// rayon's own default.
pub fn worker_pool(threads: Option<usize>) -> rayon::ThreadPool {
    let n = threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool")
}
