//! Stacked linear network whose backward pass records per-sample layer
//! inputs and output gradients.

mod checkpoint;
mod forward;
mod params;
mod spec;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub(crate) use forward::softmax_into;
pub use forward::{backward_joint, forward, grad_from_trace, ForwardPass, LayerTrace, TraceLayer};
pub use params::{LayerParams, ModelParams};
pub use spec::{Activation, Example, LossKind, ModelSpec, Target};

#[cfg(test)]
mod tests;
