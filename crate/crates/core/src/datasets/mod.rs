//! Synthetic tasks and CSV input/output.

mod composition;
mod csv_io;
mod generate;

pub use composition::{domain_composition, domain_totals, save_composition, CompositionRow};
pub use csv_io::{load_csv, save_dataset, save_scores};
pub use generate::{
    domain_name, generate, stratified_counts, GeneratedTask, GeneratorKind, SyntheticTaskSpec, CLASS_SEPARATION,
    DOMAIN_SHIFT,
};

#[cfg(test)]
mod tests;
