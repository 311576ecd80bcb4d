use crate::error::{Error, Result};
use crate::model::{Example, ModelParams};
use crate::numerics::sample_batch;
use crate::oracle::reference::{flat_dot, mat_vec, reference_gradient, reference_hessian};
use crate::shapley::{IterationRecord, Order, StepValues, ValueLedger};
use crate::trainer::{batch_rng, initial_params, Attribution, TrainConfig};

/// Replays a training run with hyper-dual per-sample gradients and explicit
/// validation Hessians, accumulating the closed-form contributions directly.
/// Shares only the initialization and batch streams with the trainer.
pub fn reference_attribution_run(config: &TrainConfig, dataset: &[Example], valset: &[Example]) -> Result<ValueLedger> {
    config.validate(dataset.len())?;
    let order = match config.attribution {
        Attribution::Second => Order::Second,
        Attribution::First | Attribution::Naive => Order::First,
        Attribution::None => return Err(Error::invalid("reference run needs an attribution order")),
    };
    let spec = &config.model;
    let mut w = initial_params(config).flatten();
    let mut rng = batch_rng(config);
    let mut ledger = ValueLedger::new(order, dataset.len(), valset.iter().map(|e| e.id).collect(), false);
    for t in 0..config.iterations {
        let state = rng.state();
        let batch = sample_batch(&mut rng, dataset.len(), config.batch_size)?;
        let lr = config.lr_at(t);
        let params = ModelParams::from_flat(spec, &w)?;
        let grads =
            batch.iter().map(|&i| reference_gradient(spec, &params, &dataset[i])).collect::<Result<Vec<_>>>()?;
        let mut g_sum = vec![0.0; w.len()];
        for g in &grads {
            g_sum.iter_mut().zip(g).for_each(|(s, x)| *s += x);
        }
        let mut steps = Vec::with_capacity(valset.len());
        for val in valset {
            let g_val = reference_gradient(spec, &params, val)?;
            let first: Vec<f64> = grads.iter().map(|g| -lr * flat_dot(&g_val, g)).collect();
            let second = if order == Order::Second {
                let hg = mat_vec(&reference_hessian(spec, &params, val)?, &g_sum);
                Some(first.iter().zip(&grads).map(|(f, g)| f + 0.5 * lr * lr * flat_dot(g, &hg)).collect())
            } else {
                None
            };
            steps.push(StepValues { first, second });
        }
        ledger.accumulate(&IterationRecord::new(t, batch, lr, state)?, &steps)?;
        w.iter_mut().zip(&g_sum).for_each(|(x, g)| *x -= lr * g);
    }
    Ok(ledger)
}
