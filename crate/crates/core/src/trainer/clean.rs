use crate::error::{Error, Result};
use crate::model::Example;
use crate::trainer::{train_with_attribution, Attribution, RunArtifacts, TrainConfig};

/// Outcome of removing negatively valued examples and retraining.
#[derive(Clone, Debug)]
pub struct CleaningReport {
    /// Dataset indices removed, ascending.
    pub removed: Vec<usize>,
    pub fraction_removed: f64,
    /// The original run's final validation loss.
    pub threshold: f64,
    /// First iteration count after which the validation loss is at or below
    /// the threshold.
    pub original_iters: Option<usize>,
    pub cleaned_iters: Option<usize>,
    pub original_val_loss: Vec<f64>,
    pub cleaned_val_loss: Vec<f64>,
}

impl CleaningReport {
    /// Relative saving in iterations, `1 − cleaned/original`.
    pub fn iteration_saving(&self) -> Option<f64> {
        match (self.original_iters, self.cleaned_iters) {
            (Some(o), Some(c)) if o > 0 => Some(1.0 - c as f64 / o as f64),
            _ => None,
        }
    }
}

/// Iterations needed for `curve` to reach `threshold` (1-based), if ever.
pub fn iterations_to_threshold(curve: &[f64], threshold: f64) -> Option<usize> {
    curve.iter().position(|&v| v <= threshold).map(|i| i + 1)
}

/// How over-represented flagged items are in `selected`:
/// `P(flagged | selected) / P(flagged)`.
pub fn enrichment(selected: &[usize], flagged: &[bool]) -> Option<f64> {
    let base = flagged.iter().filter(|&&f| f).count() as f64 / flagged.len() as f64;
    if selected.is_empty() || base == 0.0 {
        return None;
    }
    let hits = selected.iter().filter(|&&i| flagged[i]).count() as f64;
    Some(hits / selected.len() as f64 / base)
}

/// Drop every example whose value in `original.ledger` is negative and train
/// again with the same configuration and seed, without attribution.
pub fn clean_and_retrain(
    config: &TrainConfig,
    dataset: &[Example],
    valset: &[Example],
    original: &RunArtifacts,
) -> Result<CleaningReport> {
    let ledger = original.ledger.as_ref().ok_or_else(|| Error::invalid("cleaning needs a run with attribution"))?;
    if ledger.n_examples() != dataset.len() {
        return Err(Error::dims("clean_and_retrain", "ledger does not cover the dataset"));
    }
    let removed: Vec<usize> = (0..dataset.len()).filter(|&i| ledger.value(i) < 0.0).collect();
    if removed.len() == dataset.len() {
        return Err(Error::AllRemoved);
    }
    let kept: Vec<Example> =
        (0..dataset.len()).filter(|i| removed.binary_search(i).is_err()).map(|i| dataset[i].clone()).collect();
    let mut retrain = config.clone();
    retrain.attribution = Attribution::None;
    retrain.batch_size = retrain.batch_size.min(kept.len());
    let cleaned = train_with_attribution(&retrain, &kept, valset)?;

    let threshold = original.final_val_loss();
    Ok(CleaningReport {
        fraction_removed: removed.len() as f64 / dataset.len() as f64,
        removed,
        threshold,
        original_iters: iterations_to_threshold(&original.val_loss, threshold),
        cleaned_iters: iterations_to_threshold(&cleaned.val_loss, threshold),
        original_val_loss: original.val_loss.clone(),
        cleaned_val_loss: cleaned.val_loss,
    })
}
