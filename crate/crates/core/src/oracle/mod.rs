//! Independent reference implementations used to check the fast paths.

mod enumerate;
pub mod fixtures;
mod local;
mod naive_run;
pub mod reference;
mod retrain;
mod taylor;

pub use enumerate::{
    exact_shapley, permutation_shapley, UtilityFn, UtilityKind, MAX_ENUMERATION_PLAYERS, MAX_PERMUTATION_PLAYERS,
};
pub use local::{true_local_utility, LocalGame, NaiveBatch};
pub use naive_run::reference_attribution_run;
pub use retrain::{retraining_shapley_tiny, RetrainSetup, MAX_RETRAIN_PLAYERS};
pub use taylor::{loglog_slope, save_taylor_csv, taylor_error_report, trimmed_mean, TaylorRow, MIN_UTILITY};
