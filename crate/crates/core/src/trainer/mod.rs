//! The instrumented SGD loop.

mod bench;
mod clean;
mod config;
mod run;

pub use bench::{runtime_bench, BenchRow, BENCH_MODES};
pub use clean::{clean_and_retrain, enrichment, iterations_to_threshold, CleaningReport};
pub use config::{Attribution, Schedule, TrainConfig};
pub use run::{
    batch_rng, initial_params, train_with_attribution, PhaseTimings, RunArtifacts, BATCH_STREAM, INIT_STREAM,
};
