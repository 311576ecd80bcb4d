use super::*;
use crate::error::Error;
use crate::numerics::{Matrix2D, SeededRng};
use crate::oracle::fixtures::{random_examples, random_params, refs};
use crate::oracle::reference::{reference_gradient, reference_loss_value};
use proptest::prelude::*;

fn scalar_net(w: f64) -> (ModelSpec, ModelParams) {
    let spec = ModelSpec::new(vec![1, 1], Activation::Identity, LossKind::Mse).unwrap().with_bias(false);
    let params =
        ModelParams { layers: vec![LayerParams { weight: Matrix2D::new(1, 1, vec![w]).unwrap(), bias: None }] };
    (spec, params)
}

fn tanh_spec(seq_len: usize) -> ModelSpec {
    ModelSpec::new(vec![3, 4, 3, 2], Activation::Tanh, LossKind::SoftmaxCrossEntropy)
        .unwrap()
        .with_seq_len(seq_len)
        .unwrap()
}

#[test]
fn zero_weights_zero_target_zero_loss() {
    let spec = ModelSpec::new(vec![3, 2], Activation::Identity, LossKind::Mse).unwrap();
    let params = ModelParams::zeros(&spec);
    let ex = Example::new(0, vec![1.0, -2.0, 0.5], Target::Regression(vec![0.0, 0.0]));
    let fwd = forward(&params, &spec, &[&ex]).unwrap();
    assert_eq!(fwd.losses(), &[0.0]);
}

#[test]
fn scalar_hand_arithmetic() {
    let (spec, params) = scalar_net(2.0);
    let ex = Example::new(0, vec![3.0], Target::value(1.0));
    let trace = forward(&params, &spec, &[&ex]).unwrap().into_trace(&params);
    assert_eq!(trace.losses, vec![12.5]);
    assert_eq!(trace.out_grads(0, 0), &[5.0]);
    assert_eq!(trace.inputs(0, 0), &[3.0]);
}

#[test]
fn loss_matches_scalar_reimplementation() {
    let mut rng = SeededRng::new(21);
    for seq_len in [1, 3] {
        let spec = tanh_spec(seq_len);
        let params = random_params(&spec, &mut rng, 1.0);
        let exs = random_examples(&spec, 5, &mut rng, 0);
        let fwd = forward(&params, &spec, &refs(&exs)).unwrap();
        for (ex, loss) in exs.iter().zip(fwd.losses()) {
            let expect = reference_loss_value(&spec, &params, ex).unwrap();
            assert!((loss - expect).abs() <= 1e-12 * (1.0 + expect.abs()), "{loss} vs {expect}");
        }
    }
}

#[test]
fn output_grads_do_not_depend_on_batch_mates() {
    let mut rng = SeededRng::new(4);
    let spec = tanh_spec(2);
    let params = random_params(&spec, &mut rng, 1.0);
    let exs = random_examples(&spec, 6, &mut rng, 0);
    let batch = forward(&params, &spec, &refs(&exs)).unwrap().into_trace(&params);
    for (i, ex) in exs.iter().enumerate() {
        let alone = forward(&params, &spec, &[ex]).unwrap().into_trace(&params);
        for layer in 0..spec.n_layers() {
            assert_eq!(batch.out_grads(layer, i), alone.out_grads(layer, 0));
            assert_eq!(batch.inputs(layer, i), alone.inputs(layer, 0));
        }
    }
}

fn fd_gradient(spec: &ModelSpec, params: &ModelParams, ex: &Example) -> Vec<f64> {
    let flat = params.flatten();
    let eps = 1e-5 * (1.0 + params.max_abs());
    (0..flat.len())
        .map(|k| {
            let mut plus = flat.clone();
            plus[k] += eps;
            let mut minus = flat.clone();
            minus[k] -= eps;
            let lp = forward(&ModelParams::from_flat(spec, &plus).unwrap(), spec, &[ex]).unwrap().losses()[0];
            let lm = forward(&ModelParams::from_flat(spec, &minus).unwrap(), spec, &[ex]).unwrap().losses()[0];
            (lp - lm) / (2.0 * eps)
        })
        .collect()
}

#[test]
fn per_sample_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(99);
    for seq_len in [1, 3] {
        let spec = tanh_spec(seq_len);
        let params = random_params(&spec, &mut rng, 1.0);
        let exs = random_examples(&spec, 4, &mut rng, 0);
        let trace = forward(&params, &spec, &refs(&exs)).unwrap().into_trace(&params);
        for (i, ex) in exs.iter().enumerate() {
            let g = grad_from_trace(&trace, &[i]).unwrap().flatten();
            let fd = fd_gradient(&spec, &params, ex);
            let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err <= 1e-6 * norm, "sample {i}: {err} vs norm {norm}");
        }
    }
}

#[test]
fn grad_from_trace_subsets() {
    let mut rng = SeededRng::new(5);
    let spec = tanh_spec(2);
    let params = random_params(&spec, &mut rng, 1.0);
    let exs = random_examples(&spec, 5, &mut rng, 0);
    let trace = forward(&params, &spec, &refs(&exs)).unwrap().into_trace(&params);

    let empty = grad_from_trace(&trace, &[]).unwrap();
    assert_eq!(empty, params.zeros_like());

    let single = grad_from_trace(&trace, &[2]).unwrap().flatten();
    let expect = reference_gradient(&spec, &params, &exs[2]).unwrap();
    for (a, b) in single.iter().zip(&expect) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    let full = grad_from_trace(&trace, &[0, 1, 2, 3, 4]).unwrap().flatten();
    let mut summed = vec![0.0; full.len()];
    for ex in &exs {
        for (s, g) in summed.iter_mut().zip(reference_gradient(&spec, &params, ex).unwrap()) {
            *s += g;
        }
    }
    for (a, b) in full.iter().zip(&summed) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    assert!(matches!(grad_from_trace(&trace, &[5]), Err(Error::UnknownSample { index: 5, .. })));
}

#[test]
fn seq_len_one_is_the_plain_network() {
    let mut rng = SeededRng::new(8);
    let spec = tanh_spec(1);
    let explicit = spec.clone().with_seq_len(1).unwrap();
    let params = random_params(&spec, &mut rng, 1.0);
    let exs = random_examples(&spec, 3, &mut rng, 0);
    let a = forward(&params, &spec, &refs(&exs)).unwrap().into_trace(&params);
    let b = forward(&params, &explicit, &refs(&exs)).unwrap().into_trace(&params);
    assert_eq!(a, b);
}

#[test]
fn joint_trace_marks_validation_rows() {
    let mut rng = SeededRng::new(6);
    let spec = tanh_spec(1);
    let params = random_params(&spec, &mut rng, 1.0);
    let exs = random_examples(&spec, 4, &mut rng, 0);
    let trace = backward_joint(&params, &spec, &refs(&exs[..3]), &[&exs[3]]).unwrap();
    assert_eq!((trace.n_train, trace.n_val(), trace.val_index(0)), (3, 1, 3));
    let alone = forward(&params, &spec, &[&exs[3]]).unwrap().into_trace(&params);
    assert_eq!(trace.out_grads(2, 3), alone.out_grads(2, 0));
}

#[test]
fn shape_errors() {
    let spec = tanh_spec(1);
    let params = ModelParams::zeros(&spec);
    let short = Example::new(7, vec![0.0; 2], Target::class(0));
    assert!(matches!(forward(&params, &spec, &[&short]), Err(Error::DimensionMismatch { .. })));
    let bad_class = Example::new(7, vec![0.0; 3], Target::class(5));
    assert!(forward(&params, &spec, &[&bad_class]).is_err());
    let regression = Example::new(7, vec![0.0; 3], Target::value(1.0));
    assert!(forward(&params, &spec, &[&regression]).is_err());
    let other = ModelSpec::new(vec![3, 5], Activation::Tanh, LossKind::Mse).unwrap();
    assert!(forward(&ModelParams::zeros(&other), &spec, &[&bad_class]).is_err());
}

#[test]
fn overflow_names_the_sample() {
    let (spec, params) = scalar_net(1e200);
    let ex = Example::new(42, vec![1e200], Target::value(0.0));
    assert!(matches!(forward(&params, &spec, &[&ex]), Err(Error::NonFiniteLoss { sample_id: 42 })));
}

#[test]
fn checkpoint_rejects_garbage() {
    assert!(decode_checkpoint(b"NOPE1").is_err());
    let spec = tanh_spec(1);
    let bytes = encode_checkpoint(&ModelParams::zeros(&spec));
    assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_checkpoint(&extra).is_err());
    assert_eq!(&bytes[..5], CHECKPOINT_MAGIC);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.irsv");
    let spec = tanh_spec(1).with_bias(false);
    let params = random_params(&spec, &mut SeededRng::new(2), 1.0);
    save_checkpoint(&path, &params).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap(), params);
}

proptest! {
    #[test]
    fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>(), bias in any::<bool>()) {
        let mut rng = SeededRng::new(seed);
        let spec = crate::oracle::fixtures::random_spec(&mut rng, Activation::Tanh, 1).with_bias(bias);
        let params = random_params(&spec, &mut rng, 3.0);
        let back = decode_checkpoint(&encode_checkpoint(&params)).unwrap();
        prop_assert_eq!(back.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        params.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert!(back.same_shape(&params));
    }
}
