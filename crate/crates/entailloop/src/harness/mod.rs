//! Experiment harness: seeding policy, configuration, thread-pool setup, and
//! the end-to-end pipeline.

pub mod config;
pub mod pipeline;
pub mod seed;

pub use config::ExperimentConfig;
pub use pipeline::{render_report, run_experiment_pipeline, RunReport};
pub use seed::derive_seed;

/// Caps worker parallelism from the `ENTAILLOOP_THREADS` environment
/// variable; 0 or unset leaves the default (one worker per core). Safe to
/// call more than once; only the first call takes effect.
pub fn init_threads_from_env() {
    if let Ok(value) = std::env::var("ENTAILLOOP_THREADS") {
        if let Ok(n) = value.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
