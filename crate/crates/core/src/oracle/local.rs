use crate::error::{Error, Result};
use crate::model::{forward, grad_from_trace, Example, LayerTrace, ModelParams, ModelSpec};
use crate::oracle::enumerate::{UtilityFn, UtilityKind};
use crate::oracle::reference::{flat_dot, mat_vec, reference_gradient, reference_hessian};

/// Explicit per-sample gradients, validation gradient, and optionally the
/// validation Hessian, all from the hyper-dual reference.
#[derive(Clone, Debug)]
pub struct NaiveBatch {
    pub grads: Vec<Vec<f64>>,
    pub val_grad: Vec<f64>,
    pub hessian: Option<Vec<Vec<f64>>>,
}

impl NaiveBatch {
    pub fn new(
        spec: &ModelSpec,
        params: &ModelParams,
        batch: &[&Example],
        val: &Example,
        hessian: bool,
    ) -> Result<Self> {
        let grads = batch.iter().map(|e| reference_gradient(spec, params, e)).collect::<Result<Vec<_>>>()?;
        let val_grad = reference_gradient(spec, params, val)?;
        let hessian = if hessian { Some(reference_hessian(spec, params, val)?) } else { None };
        Ok(NaiveBatch { grads, val_grad, hessian })
    }

    fn sum(&self, subset: &[usize]) -> Vec<f64> {
        let mut s = vec![0.0; self.val_grad.len()];
        for &i in subset {
            s.iter_mut().zip(&self.grads[i]).for_each(|(a, g)| *a += g);
        }
        s
    }

    pub fn val_dot(&self, i: usize) -> f64 {
        flat_dot(&self.val_grad, &self.grads[i])
    }

    /// `g_iᵀ H (Σ_batch g)`.
    pub fn ghg(&self, i: usize) -> f64 {
        let h = self.hessian.as_ref().expect("hessian requested");
        let all: Vec<usize> = (0..self.grads.len()).collect();
        flat_dot(&self.grads[i], &mat_vec(h, &self.sum(&all)))
    }

    /// `U₁(S) = −lr · g_val · Σ_S g`.
    pub fn first_order(&self, subset: &[usize], lr: f64) -> f64 {
        -lr * flat_dot(&self.val_grad, &self.sum(subset))
    }

    /// `U₂(S) = lr² · (Σ_S g)ᵀ H (Σ_S g)`.
    pub fn second_order_term(&self, subset: &[usize], lr: f64) -> f64 {
        let h = self.hessian.as_ref().expect("hessian requested");
        let g = self.sum(subset);
        lr * lr * flat_dot(&g, &mat_vec(h, &g))
    }

    pub fn first_order_utility(&self, lr: f64) -> UtilityFn<'_> {
        UtilityFn::new(UtilityKind::FirstOrder, self.grads.len(), move |s| self.first_order(s, lr))
    }

    /// `U₁ + ½U₂`.
    pub fn second_order_utility(&self, lr: f64) -> UtilityFn<'_> {
        UtilityFn::new(UtilityKind::SecondOrder, self.grads.len(), move |s| {
            self.first_order(s, lr) + 0.5 * self.second_order_term(s, lr)
        })
    }
}

/// The validation-loss change of one counterfactual SGD step restricted to a
/// subset of a batch.
pub struct LocalGame<'a> {
    params: &'a ModelParams,
    spec: &'a ModelSpec,
    val: &'a Example,
    trace: LayerTrace,
    base_loss: f64,
}

impl<'a> LocalGame<'a> {
    pub fn new(params: &'a ModelParams, spec: &'a ModelSpec, batch: &[&Example], val: &'a Example) -> Result<Self> {
        let trace = forward(params, spec, batch)?.into_trace(params);
        let base_loss = forward(params, spec, &[val])?.losses()[0];
        Ok(LocalGame { params, spec, val, trace, base_loss })
    }

    pub fn players(&self) -> usize {
        self.trace.n_samples()
    }

    pub fn trace(&self) -> &LayerTrace {
        &self.trace
    }

    /// `ℓ(w − lr·Σ_S ∇ℓ, val) − ℓ(w, val)`, evaluated by taking the step.
    pub fn utility(&self, subset: &[usize], lr: f64) -> Result<f64> {
        if subset.is_empty() {
            return Ok(0.0);
        }
        let g = grad_from_trace(&self.trace, subset)?;
        let mut w = self.params.clone();
        w.axpy(-lr, &g)?;
        let loss = forward(&w, self.spec, &[self.val])?.losses()[0];
        Ok(loss - self.base_loss)
    }

    pub fn utility_fn(&self, lr: f64) -> UtilityFn<'_> {
        UtilityFn::new(UtilityKind::TrueLocal, self.players(), move |s| self.utility(s, lr).unwrap_or(f64::NAN))
    }
}

/// One-off [`LocalGame::utility`].
pub fn true_local_utility(
    params: &ModelParams,
    spec: &ModelSpec,
    batch: &[&Example],
    subset: &[usize],
    lr: f64,
    val: &Example,
) -> Result<f64> {
    if let Some(&bad) = subset.iter().find(|&&i| i >= batch.len()) {
        return Err(Error::UnknownSample { index: bad, available: batch.len() });
    }
    LocalGame::new(params, spec, batch, val)?.utility(subset, lr)
}
