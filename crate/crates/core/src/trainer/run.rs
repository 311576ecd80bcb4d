use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::ghost::{ghost_hvp_dots, ghost_val_dots, hvp_trace};
use crate::model::{backward_joint, forward, grad_from_trace, Example, ModelParams};
use crate::numerics::{sample_batch, SeededRng};
use crate::shapley::{
    first_order_from_val_dots, second_order_from_parts, IterationRecord, Order, StepValues, ValueLedger,
};
use crate::trainer::{Attribution, TrainConfig};

/// RNG stream for parameter initialization.
pub const INIT_STREAM: u64 = 1;
/// RNG stream for batch sampling.
pub const BATCH_STREAM: u64 = 2;

/// Initial parameters for a run.
pub fn initial_params(config: &TrainConfig) -> ModelParams {
    let mut rng = SeededRng::with_stream(config.seed, INIT_STREAM);
    ModelParams::init(&config.model, &mut rng, config.init_scale)
}

/// Batch sampler for a run.
pub fn batch_rng(config: &TrainConfig) -> SeededRng {
    SeededRng::with_stream(config.seed, BATCH_STREAM)
}

/// Wall-clock time per phase, summed over iterations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    /// Forward and backward passes, including the per-sample passes of the
    /// naive baseline.
    pub backward: Duration,
    pub attribution: Duration,
    pub update: Duration,
    /// Validation-loss evaluation after each step; not part of training cost.
    pub evaluation: Duration,
}

impl PhaseTimings {
    /// Training cost: everything except evaluation.
    pub fn step_total(&self) -> Duration {
        self.backward + self.attribution + self.update
    }
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub params: ModelParams,
    pub ledger: Option<ValueLedger>,
    /// Mean batch loss at `w_t`, per iteration.
    pub train_loss: Vec<f64>,
    /// Mean validation loss at `w_{t+1}`, per iteration.
    pub val_loss: Vec<f64>,
    pub initial_val_loss: f64,
    pub timings: PhaseTimings,
    /// Backward-style passes per iteration.
    pub backward_passes: Vec<usize>,
    pub records: Vec<IterationRecord>,
    /// Per-iteration validation-loss reduction predicted by the approximated
    /// utility, summed over targets. Computed from the aggregate gradient, not
    /// from the per-example contributions.
    pub predicted_reduction: Vec<f64>,
}

impl RunArtifacts {
    pub fn total_predicted_reduction(&self) -> f64 {
        self.predicted_reduction.iter().sum()
    }

    pub fn final_val_loss(&self) -> f64 {
        *self.val_loss.last().unwrap_or(&self.initial_val_loss)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn eval_loss(params: &ModelParams, config: &TrainConfig, valset: &[&Example], iteration: usize) -> Result<f64> {
    if valset.is_empty() {
        return Ok(0.0);
    }
    let fwd = forward(params, &config.model, valset).map_err(|e| diverged(e, iteration))?;
    Ok(mean(fwd.losses()))
}

fn diverged(e: Error, iteration: usize) -> Error {
    match e {
        Error::NonFiniteLoss { .. } | Error::NonFinite(_) => Error::Divergence { iteration },
        other => other,
    }
}

/// SGD over `dataset`, attributing each step to every example of `valset`.
///
/// Attribution never alters the trajectory: the update gradient is formed
/// from the batch rows of the trace alone, and batch rows are computed
/// independently of the validation rows appended to them.
pub fn train_with_attribution(config: &TrainConfig, dataset: &[Example], valset: &[Example]) -> Result<RunArtifacts> {
    config.validate(dataset.len())?;
    let needs_val = config.attribution != Attribution::None;
    if needs_val && valset.is_empty() {
        return Err(Error::invalid("attribution needs at least one validation target"));
    }
    let spec = &config.model;
    let vals: Vec<&Example> = valset.iter().collect();
    let k = vals.len();
    let b = config.batch_size;
    let batch_idx: Vec<usize> = (0..b).collect();

    let mut params = initial_params(config);
    let mut rng = batch_rng(config);
    let order = match config.attribution {
        Attribution::Second => Some(Order::Second),
        Attribution::First | Attribution::Naive => Some(Order::First),
        Attribution::None => None,
    };
    let mut ledger =
        order.map(|o| ValueLedger::new(o, dataset.len(), valset.iter().map(|e| e.id).collect(), config.log_iterations));

    let mut timings = PhaseTimings::default();
    let mut out = RunArtifacts {
        params: ModelParams::zeros(spec),
        ledger: None,
        train_loss: Vec::with_capacity(config.iterations),
        val_loss: Vec::with_capacity(config.iterations),
        initial_val_loss: eval_loss(&params, config, &vals, 0)?,
        timings: PhaseTimings::default(),
        backward_passes: Vec::with_capacity(config.iterations),
        records: Vec::with_capacity(config.iterations),
        predicted_reduction: Vec::new(),
    };

    for t in 0..config.iterations {
        let state = rng.state();
        let batch = sample_batch(&mut rng, dataset.len(), b)?;
        let lr = config.lr_at(t);
        let record = IterationRecord::new(t, batch, lr, state)?;
        let examples: Vec<&Example> = record.batch.iter().map(|&i| &dataset[i]).collect();

        let clock = Instant::now();
        let mut passes = 1;
        let (update, trace, naive_grads) = match config.attribution {
            Attribution::None => {
                let trace = forward(&params, spec, &examples).map_err(|e| diverged(e, t))?.into_trace(&params);
                (grad_from_trace(&trace, &batch_idx)?, trace, None)
            }
            Attribution::First | Attribution::Second => {
                let trace = backward_joint(&params, spec, &examples, &vals).map_err(|e| diverged(e, t))?;
                (grad_from_trace(&trace, &batch_idx)?, trace, None)
            }
            Attribution::Naive => {
                let mut grads = Vec::with_capacity(b);
                let mut losses = Vec::with_capacity(b);
                for ex in &examples {
                    let tr = forward(&params, spec, &[*ex]).map_err(|e| diverged(e, t))?.into_trace(&params);
                    losses.push(tr.losses[0]);
                    grads.push(grad_from_trace(&tr, &[0])?);
                }
                let mut sum = params.zeros_like();
                for g in &grads {
                    sum.axpy(1.0, g)?;
                }
                let val_trace = forward(&params, spec, &vals).map_err(|e| diverged(e, t))?.into_trace(&params);
                passes = b + 1;
                (sum, val_trace, Some((grads, losses)))
            }
        };
        timings.backward += clock.elapsed();
        let batch_losses = match &naive_grads {
            Some((_, losses)) => losses.as_slice(),
            None => &trace.losses[..b],
        };
        let train_loss = mean(batch_losses);
        if !train_loss.is_finite() {
            return Err(Error::Divergence { iteration: t });
        }

        let clock = Instant::now();
        if let Some(ledger) = &mut ledger {
            let mut steps = Vec::with_capacity(k);
            let mut predicted = 0.0;
            match config.attribution {
                Attribution::First | Attribution::Second => {
                    let vd = ghost_val_dots(&trace)?;
                    // One R-operator pass over every target along the update.
                    let hess = if config.attribution == Attribution::Second {
                        let h = hvp_trace(&params, spec, &vals, &update).map_err(|e| diverged(e, t))?;
                        passes += 1;
                        let dots = ghost_hvp_dots(&trace, &batch_idx, &h)?;
                        Some((h, dots))
                    } else {
                        None
                    };
                    for v in 0..k {
                        let val_dots = vd.row(v);
                        let g_val = grad_from_trace(&trace, &[trace.val_index(v)])?;
                        predicted += lr * g_val.dot(&update)?;
                        let second = match &hess {
                            Some((h, dots)) => {
                                predicted -= 0.5 * lr * lr * update.dot(&h.materialize(v)?)?;
                                Some(second_order_from_parts(val_dots, dots.row(v), lr)?)
                            }
                            None => None,
                        };
                        steps.push(StepValues { first: first_order_from_val_dots(val_dots, lr), second });
                    }
                }
                Attribution::Naive => {
                    let (grads, _) = naive_grads.as_ref().expect("naive gradients");
                    for v in 0..k {
                        let g_val = grad_from_trace(&trace, &[v])?;
                        predicted += lr * g_val.dot(&update)?;
                        let dots = grads.iter().map(|g| g_val.dot(g)).collect::<Result<Vec<_>>>()?;
                        steps.push(StepValues { first: first_order_from_val_dots(&dots, lr), second: None });
                    }
                }
                Attribution::None => unreachable!("no ledger without attribution"),
            }
            ledger.accumulate(&record, &steps)?;
            out.predicted_reduction.push(predicted);
        }
        timings.attribution += clock.elapsed();

        let clock = Instant::now();
        params.axpy(-lr, &update)?;
        timings.update += clock.elapsed();
        if !params.is_finite() {
            return Err(Error::Divergence { iteration: t });
        }

        let clock = Instant::now();
        out.val_loss.push(eval_loss(&params, config, &vals, t)?);
        timings.evaluation += clock.elapsed();

        out.train_loss.push(train_loss);
        out.backward_passes.push(passes);
        out.records.push(record);
    }

    out.params = params;
    out.ledger = ledger;
    out.timings = timings;
    Ok(out)
}
