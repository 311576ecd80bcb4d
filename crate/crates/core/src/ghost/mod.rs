//! Per-sample gradient algebra computed from backward traces.
//!
//! For a linear layer `s = a W`, the gradient of one sample's loss is
//! `a_iᵀ b_i` with `b_i = ∂ℓ_i/∂s_i`, so inner products between per-sample
//! gradients reduce to products of small Gram matrices over positions.

mod dots;
mod ghg;
mod hvp;

pub use dots::{
    ghost_cross_dots, ghost_pairwise_dots, ghost_pairwise_dots_with, ghost_val_dots, DotBranch, PairwiseDots,
};
pub use ghg::{ghost_bilinear, ghost_bilinear_batch, ghost_ghg, ghost_hvp_dots, ghost_hvp_dots_with};
pub use hvp::{hvp, hvp_trace, HvpLayer, HvpTrace, HvpVector};
