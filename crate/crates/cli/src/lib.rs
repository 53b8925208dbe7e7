//! Scenario runner for `recoil-lab`: reads TOML specs, runs the requested
//! routes and writes data files, a JSON report and a manifest.

pub mod compare;
pub mod io;
pub mod model;
pub mod run;
pub mod scenarios;
pub mod spec;

pub use run::{execute, RunError, RunOptions, RunOutcome};
pub use spec::ScenarioSpec;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "RECOIL_THREADS";

/// Runs `f` on a pool sized by [`THREADS_ENV`], or on the global pool when unset.
pub fn with_thread_limit<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R, String> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
            if n == 0 {
                return Err(format!("{THREADS_ENV} must be at least 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| e.to_string())?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}
