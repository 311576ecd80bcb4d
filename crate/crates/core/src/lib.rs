//! Training-time data attribution: per-iteration Shapley values of training
//! examples toward a validation loss, computed alongside ordinary SGD.

pub mod config;
pub mod datasets;
pub mod error;
pub mod ghost;
pub mod io;
pub mod model;
pub mod numerics;
pub mod oracle;
pub(crate) mod par;
pub mod shapley;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
pub use par::is_parallel;
