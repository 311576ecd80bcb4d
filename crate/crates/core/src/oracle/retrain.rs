use crate::error::{Error, Result};
use crate::model::{forward, grad_from_trace, Example, ModelParams, ModelSpec};
use crate::oracle::enumerate::{exact_shapley, UtilityFn, UtilityKind};

/// Deterministic full-batch gradient descent from a fixed start.
#[derive(Clone, Debug)]
pub struct RetrainSetup<'a> {
    pub spec: &'a ModelSpec,
    pub init: &'a ModelParams,
    pub lr: f64,
    pub steps: usize,
}

pub const MAX_RETRAIN_PLAYERS: usize = 10;

impl RetrainSetup<'_> {
    /// Parameters after training on `subset` of `data`.
    pub fn train(&self, data: &[Example], subset: &[usize]) -> Result<ModelParams> {
        let mut w = self.init.clone();
        if subset.is_empty() {
            return Ok(w);
        }
        let examples: Vec<&Example> = subset.iter().map(|&i| &data[i]).collect();
        let all: Vec<usize> = (0..examples.len()).collect();
        for _ in 0..self.steps {
            let trace = forward(&w, self.spec, &examples)?.into_trace(&w);
            w.axpy(-self.lr, &grad_from_trace(&trace, &all)?)?;
        }
        Ok(w)
    }

    fn val_loss(&self, w: &ModelParams, val: &Example) -> Result<f64> {
        Ok(forward(w, self.spec, &[val])?.losses()[0])
    }

    /// `U(S) = ℓ_val(w₀) − ℓ_val(A(S))`: the validation-loss reduction from
    /// training on `S`.
    pub fn utility(&self, data: &[Example], val: &Example, subset: &[usize]) -> Result<f64> {
        let start = self.val_loss(self.init, val)?;
        Ok(start - self.val_loss(&self.train(data, subset)?, val)?)
    }

    pub fn utility_fn<'b>(&'b self, data: &'b [Example], val: &'b Example) -> UtilityFn<'b> {
        UtilityFn::new(UtilityKind::Retraining, data.len(), move |s| self.utility(data, val, s).unwrap_or(f64::NAN))
    }
}

/// Exact Shapley values of the retraining utility, one training run per
/// subset.
pub fn retraining_shapley_tiny(setup: &RetrainSetup, data: &[Example], val: &Example) -> Result<Vec<f64>> {
    if data.len() > MAX_RETRAIN_PLAYERS {
        return Err(Error::TooManyPlayers { what: "retraining_shapley_tiny", n: data.len(), max: MAX_RETRAIN_PLAYERS });
    }
    exact_shapley(&setup.utility_fn(data, val))
}
