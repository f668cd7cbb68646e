//! Experiment harness for cross-space filtered graph networks.
//!
//! [`experiment::run_experiment`] trains every `(depth, seed)` cell of a
//! configuration and writes
//!
//! ```text
//! out/<experiment-id>/
//!     config.json      the configuration as run
//!     metadata.json    split source, admissible fusion weights
//!     runs/d{depth}_s{seed}.json
//!     aggregate.tsv    mean and population std of test accuracy per depth
//!     gamma_scores.tsv validation accuracy of every γ tried, per (depth, seed)
//! ```
//!
//! The other subcommands live in [`commands`].

pub mod commands;
pub mod config;
pub mod data;
pub mod experiment;

use csf_core::{Error, Result};

/// Environment variable bounding the worker pool.
pub const THREADS_ENV: &str = "CSF_THREADS";

/// A rayon pool sized by `CSF_THREADS`, or by rayon's default when unset.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Parameter(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))
}
