use crate::error::{Error, Result};
use crate::ghost::PairwiseDots;

/// One SGD step: which examples were in the batch and the rate applied.
///
/// `batch` holds dataset indices in ascending order. `lr` is the step size of
/// the summed-gradient update `w ← w − lr·Σ_B ∇ℓ`, so any `1/|B|` factor is
/// already folded in.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub batch: Vec<usize>,
    pub lr: f64,
    /// Batch RNG state before this batch was drawn.
    pub rng_state: u64,
}

impl IterationRecord {
    pub fn new(iteration: usize, batch: Vec<usize>, lr: f64, rng_state: u64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive and finite, got {lr}")));
        }
        if batch.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("batch indices must be strictly ascending"));
        }
        Ok(IterationRecord { iteration, batch, lr, rng_state })
    }
}

fn check_dots(dots: &PairwiseDots, record: &IterationRecord) -> Result<()> {
    if dots.n_train() != record.batch.len() || dots.size() <= dots.n_train() {
        return Err(Error::dims(
            "shapley step",
            format!("dots cover {} training rows, batch has {}", dots.n_train(), record.batch.len()),
        ));
    }
    Ok(())
}

/// `−lr · ∇ℓ_val · ∇ℓ_z` for each batch member, against the first validation
/// target in `dots`.
pub fn first_order_step(dots: &PairwiseDots, record: &IterationRecord) -> Result<Vec<f64>> {
    check_dots(dots, record)?;
    Ok(first_order_from_val_dots(&dots.val_row(0), record.lr))
}

/// First-order contributions from the validation row alone.
pub fn first_order_from_val_dots(val_dots: &[f64], lr: f64) -> Vec<f64> {
    val_dots.iter().map(|d| -lr * d).collect()
}

/// `−lr · ∇ℓ_val · ∇ℓ_z + (lr²/2) · ∇ℓ_zᵀ H_val Σ_B ∇ℓ` for each batch
/// member. `ghg` is the output of `ghost_ghg` on the same trace.
pub fn second_order_step(dots: &PairwiseDots, ghg: &[f64], record: &IterationRecord) -> Result<Vec<f64>> {
    check_dots(dots, record)?;
    second_order_from_parts(&dots.val_row(0), ghg, record.lr)
}

/// Second-order contributions from the validation row and GHG terms.
pub fn second_order_from_parts(val_dots: &[f64], ghg: &[f64], lr: f64) -> Result<Vec<f64>> {
    if val_dots.len() != ghg.len() {
        return Err(Error::dims("second_order_step", format!("{} dots vs {} ghg terms", val_dots.len(), ghg.len())));
    }
    let half = 0.5 * lr * lr;
    Ok(val_dots.iter().zip(ghg).map(|(d, h)| -lr * d + half * h).collect())
}
