//! Random problem instances for oracle checks.

use crate::model::{Activation, Example, LossKind, ModelParams, ModelSpec, Target};
use crate::numerics::SeededRng;

/// `n` examples with standard-normal features and random targets.
pub fn random_examples(spec: &ModelSpec, n: usize, rng: &mut SeededRng, first_id: usize) -> Vec<Example> {
    let t = spec.seq_len;
    let d_out = spec.output_dim();
    (0..n)
        .map(|i| {
            let features = (0..spec.feature_len()).map(|_| rng.normal()).collect();
            let target = match spec.loss {
                LossKind::SoftmaxCrossEntropy => {
                    Target::Class((0..t).map(|_| rng.below(d_out as u64) as usize).collect())
                }
                LossKind::Mse => Target::Regression((0..d_out * t).map(|_| rng.normal()).collect()),
            };
            Example::new(first_id + i, features, target)
        })
        .collect()
}

/// Parameters with non-zero biases so every term is exercised.
pub fn random_params(spec: &ModelSpec, rng: &mut SeededRng, scale: f64) -> ModelParams {
    let mut p = ModelParams::init(spec, rng, scale);
    for l in &mut p.layers {
        if let Some(b) = &mut l.bias {
            b.iter_mut().for_each(|v| *v = 0.1 * rng.normal());
        }
    }
    p
}

/// Random architecture with 1 to 3 layers and small widths.
pub fn random_spec(rng: &mut SeededRng, activation: Activation, seq_len: usize) -> ModelSpec {
    let layers = 1 + rng.below(3) as usize;
    let dims: Vec<usize> = (0..=layers).map(|_| 1 + rng.below(5) as usize).collect();
    let loss = if dims[layers] >= 2 && rng.below(2) == 0 { LossKind::SoftmaxCrossEntropy } else { LossKind::Mse };
    let bias = rng.below(4) != 0;
    ModelSpec::new(dims, activation, loss)
        .and_then(|s| s.with_seq_len(seq_len))
        .expect("valid random spec")
        .with_bias(bias)
}

/// One-layer linear regression with MSE: the loss is exactly quadratic in
/// the parameters.
pub fn quadratic_spec(d_in: usize, d_out: usize) -> ModelSpec {
    ModelSpec::new(vec![d_in, d_out], Activation::Identity, LossKind::Mse).expect("valid spec")
}

pub fn refs(examples: &[Example]) -> Vec<&Example> {
    examples.iter().collect()
}
