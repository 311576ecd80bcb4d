//! Closed-form per-iteration Shapley contributions and their accumulation.

mod ledger;
mod step;

pub use ledger::{IterationLog, Order, StepValues, ValueLedger};
pub use step::{
    first_order_from_val_dots, first_order_step, second_order_from_parts, second_order_step, IterationRecord,
};
