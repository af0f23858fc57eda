//! Worker pool sizing.

/// Environment variable capping worker parallelism; `0` or unset means auto.
pub const THREADS_ENV: &str = "TACMAP_THREADS";

/// Installs the global rayon pool according to `TACMAP_THREADS`.
///
/// Safe to call more than once; only the first call has an effect.
pub fn configure_from_env() {
    let requested = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    // A second build attempt fails with "already initialized", which is fine.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(requested)
        .build_global();
}
