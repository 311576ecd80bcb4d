use crate::error::{Error, Result};
use crate::model::{Example, LossKind, ModelParams, ModelSpec, Target};
use crate::numerics::{matmul_rows_into, matmul_rows_transposed_into, Matrix2D};
use crate::par;

/// Per-row supervision after broadcasting.
#[derive(Clone, Debug)]
enum RowTargets {
    Classes(Vec<usize>),
    /// `rows x d_out`, row-major.
    Values(Vec<f64>),
}

/// Activations and pre-activations of one forward pass over a stack of
/// examples. Every example occupies `seq_len` consecutive rows.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    spec: ModelSpec,
    ids: Vec<usize>,
    inputs: Vec<Matrix2D>,
    pre: Vec<Matrix2D>,
    targets: RowTargets,
    losses: Vec<f64>,
}

/// Layer inputs `a` and output gradients `b = ∂ℓ/∂s` for one layer, stacked
/// over samples (`seq_len` rows per sample).
#[derive(Clone, Debug, PartialEq)]
pub struct TraceLayer {
    pub inputs: Matrix2D,
    pub out_grads: Matrix2D,
    pub has_bias: bool,
}

/// Everything a backward pass leaves behind: per layer and per sample the
/// input activation and the output gradient, plus per-sample losses.
///
/// Samples `0..n_train` are training points; any remaining samples are
/// validation targets.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace {
    pub layers: Vec<TraceLayer>,
    pub losses: Vec<f64>,
    pub ids: Vec<usize>,
    pub seq_len: usize,
    pub n_train: usize,
}

fn check_example(spec: &ModelSpec, ex: &Example) -> Result<()> {
    if ex.features.len() != spec.feature_len() {
        return Err(Error::dims(
            "forward",
            format!("example {} has {} features, expected {}", ex.id, ex.features.len(), spec.feature_len()),
        ));
    }
    let t = spec.seq_len;
    let d_out = spec.output_dim();
    match (&ex.target, spec.loss) {
        (Target::Class(c), _) => {
            if c.len() != 1 && c.len() != t {
                return Err(Error::dims(
                    "forward",
                    format!("example {}: {} class labels for {t} positions", ex.id, c.len()),
                ));
            }
            if let Some(bad) = c.iter().find(|&&k| k >= d_out) {
                return Err(Error::invalid(format!("example {}: class {bad} out of range for {d_out} outputs", ex.id)));
            }
        }
        (Target::Regression(_), LossKind::SoftmaxCrossEntropy) => {
            return Err(Error::invalid(format!("example {}: cross-entropy needs a class target", ex.id)));
        }
        (Target::Regression(v), LossKind::Mse) => {
            if v.len() != d_out && v.len() != d_out * t {
                return Err(Error::dims(
                    "forward",
                    format!("example {}: regression target of length {}", ex.id, v.len()),
                ));
            }
        }
    }
    Ok(())
}

fn row_targets(spec: &ModelSpec, examples: &[&Example]) -> RowTargets {
    let t = spec.seq_len;
    let d_out = spec.output_dim();
    match spec.loss {
        LossKind::SoftmaxCrossEntropy => {
            let mut classes = Vec::with_capacity(examples.len() * t);
            for ex in examples {
                let Target::Class(c) = &ex.target else { unreachable!("checked") };
                classes.extend((0..t).map(|p| if c.len() == 1 { c[0] } else { c[p] }));
            }
            RowTargets::Classes(classes)
        }
        LossKind::Mse => {
            let mut values = vec![0.0; examples.len() * t * d_out];
            for (i, ex) in examples.iter().enumerate() {
                for p in 0..t {
                    let row = &mut values[(i * t + p) * d_out..(i * t + p + 1) * d_out];
                    match &ex.target {
                        Target::Class(c) => row[if c.len() == 1 { c[0] } else { c[p] }] = 1.0,
                        Target::Regression(v) if v.len() == d_out => row.copy_from_slice(v),
                        Target::Regression(v) => row.copy_from_slice(&v[p * d_out..(p + 1) * d_out]),
                    }
                }
            }
            RowTargets::Values(values)
        }
    }
}

/// `out = inputs · W + bias`, row by row.
fn linear(inputs: &Matrix2D, layer: &crate::model::LayerParams) -> Matrix2D {
    let mut out = Matrix2D::zeros(inputs.rows(), layer.weight.cols());
    matmul_rows_into(inputs.data(), inputs.cols(), &layer.weight, out.data_mut());
    if let Some(b) = &layer.bias {
        let cols = b.len();
        par::for_each_row(out.data_mut(), cols, |_, row| {
            row.iter_mut().zip(b).for_each(|(v, bi)| *v += bi);
        });
    }
    out
}

/// Runs the network on `examples` and records what backpropagation needs.
pub fn forward(params: &ModelParams, spec: &ModelSpec, examples: &[&Example]) -> Result<ForwardPass> {
    spec.validate()?;
    if !params.matches_spec(spec) {
        return Err(Error::dims("forward", "parameters do not match the model spec"));
    }
    for ex in examples {
        check_example(spec, ex)?;
    }
    let t = spec.seq_len;
    let rows = examples.len() * t;
    let d0 = spec.input_dim();
    let mut x = Vec::with_capacity(rows * d0);
    for ex in examples {
        x.extend_from_slice(&ex.features);
    }
    let mut a = Matrix2D::new(rows, d0, x)?;
    let mut inputs = Vec::with_capacity(spec.n_layers());
    let mut pre = Vec::with_capacity(spec.n_layers());
    for (i, layer) in params.layers.iter().enumerate() {
        let s = linear(&a, layer);
        inputs.push(a);
        if i + 1 < spec.n_layers() {
            let act = spec.activations[i];
            let mut next = s.clone();
            next.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
            a = next;
        } else {
            a = Matrix2D::zeros(0, 0);
        }
        pre.push(s);
    }

    let targets = row_targets(spec, examples);
    let output = pre.last().expect("at least one layer");
    let d_out = spec.output_dim();
    let row_loss = |r: usize| -> f64 {
        let s = output.row(r);
        match &targets {
            RowTargets::Values(y) => {
                let y = &y[r * d_out..(r + 1) * d_out];
                0.5 * s.iter().zip(y).map(|(si, yi)| (si - yi) * (si - yi)).sum::<f64>()
            }
            RowTargets::Classes(c) => log_sum_exp(s) - s[c[r]],
        }
    };
    let mut losses = Vec::with_capacity(examples.len());
    for (i, ex) in examples.iter().enumerate() {
        let mut loss = 0.0;
        for p in 0..t {
            loss += row_loss(i * t + p);
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { sample_id: ex.id });
        }
        losses.push(loss);
    }

    Ok(ForwardPass { spec: spec.clone(), ids: examples.iter().map(|e| e.id).collect(), inputs, pre, targets, losses })
}

pub(crate) fn log_sum_exp(s: &[f64]) -> f64 {
    let m = s.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_into(s: &[f64], out: &mut [f64]) {
    let m = s.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut z = 0.0;
    for (o, v) in out.iter_mut().zip(s) {
        *o = (v - m).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
}

impl ForwardPass {
    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn n_samples(&self) -> usize {
        self.ids.len()
    }

    /// Network outputs, `seq_len` rows per sample.
    pub fn outputs(&self) -> &Matrix2D {
        self.pre.last().expect("at least one layer")
    }

    pub(crate) fn inputs(&self) -> &[Matrix2D] {
        &self.inputs
    }

    pub(crate) fn pre_activations(&self) -> &[Matrix2D] {
        &self.pre
    }

    /// `∂ℓ/∂s_L` for every row.
    pub(crate) fn output_grads(&self) -> Matrix2D {
        let out = self.outputs();
        let d_out = out.cols();
        let mut b = out.clone();
        match &self.targets {
            RowTargets::Values(y) => {
                b.data_mut().iter_mut().zip(y).for_each(|(v, yi)| *v -= yi);
            }
            RowTargets::Classes(c) => {
                par::for_each_row(b.data_mut(), d_out, |r, row| {
                    let s = out.row(r);
                    softmax_into(s, row);
                    row[c[r]] -= 1.0;
                });
            }
        }
        b
    }

    /// Backpropagates the summed loss. Row independence means each sample's
    /// output gradients equal those of its own loss.
    pub fn backward(&self, params: &ModelParams) -> LayerTrace {
        self.clone().into_trace(params)
    }

    /// Like [`ForwardPass::backward`] but reuses the cached activations.
    pub fn into_trace(self, params: &ModelParams) -> LayerTrace {
        let n_layers = self.spec.n_layers();
        let mut grads = vec![Matrix2D::zeros(0, 0); n_layers];
        let mut b = self.output_grads();
        for i in (0..n_layers).rev() {
            if i > 0 {
                let w = &params.layers[i].weight;
                let mut e = Matrix2D::zeros(b.rows(), w.rows());
                matmul_rows_transposed_into(b.data(), w, e.data_mut());
                let act = self.spec.activations[i - 1];
                let s = &self.pre[i - 1];
                e.data_mut().iter_mut().zip(s.data()).for_each(|(v, si)| *v *= act.derivative(*si));
                grads[i] = std::mem::replace(&mut b, e);
            } else {
                grads[0] = std::mem::replace(&mut b, Matrix2D::zeros(0, 0));
            }
        }
        let n = self.ids.len();
        let layers = self
            .inputs
            .into_iter()
            .zip(grads)
            .enumerate()
            .map(|(i, (inputs, out_grads))| TraceLayer { inputs, out_grads, has_bias: self.spec.bias[i] })
            .collect();
        LayerTrace { layers, losses: self.losses, ids: self.ids, seq_len: self.spec.seq_len, n_train: n }
    }
}

/// One forward/backward over `batch` followed by `val`, as if backpropagating
/// `Σ ℓ_batch + Σ ℓ_val`. The aggregated parameter gradient is not formed.
pub fn backward_joint(
    params: &ModelParams,
    spec: &ModelSpec,
    batch: &[&Example],
    val: &[&Example],
) -> Result<LayerTrace> {
    let all: Vec<&Example> = batch.iter().chain(val).copied().collect();
    let mut trace = forward(params, spec, &all)?.into_trace(params);
    trace.n_train = batch.len();
    Ok(trace)
}

impl LayerTrace {
    pub fn n_samples(&self) -> usize {
        self.losses.len()
    }

    pub fn n_val(&self) -> usize {
        self.n_samples() - self.n_train
    }

    /// Trace index of validation target `v`.
    pub fn val_index(&self, v: usize) -> usize {
        self.n_train + v
    }

    /// `seq_len x d_in` block of layer inputs for sample `i`.
    pub fn inputs(&self, layer: usize, i: usize) -> &[f64] {
        self.layers[layer].inputs.row_block(i * self.seq_len, self.seq_len)
    }

    /// `seq_len x d_out` block of output gradients for sample `i`.
    pub fn out_grads(&self, layer: usize, i: usize) -> &[f64] {
        self.layers[layer].out_grads.row_block(i * self.seq_len, self.seq_len)
    }

    /// Bias gradient of sample `i`: `b` summed over positions.
    pub fn bias_grad(&self, layer: usize, i: usize) -> Vec<f64> {
        let cols = self.layers[layer].out_grads.cols();
        let mut out = vec![0.0; cols];
        for row in self.out_grads(layer, i).chunks(cols) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n_samples() {
            Ok(())
        } else {
            Err(Error::UnknownSample { index: i, available: self.n_samples() })
        }
    }

    /// A zero gradient shaped like the traced network.
    pub fn zero_params(&self) -> ModelParams {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| crate::model::LayerParams {
                    weight: Matrix2D::zeros(l.inputs.cols(), l.out_grads.cols()),
                    bias: l.has_bias.then(|| vec![0.0; l.out_grads.cols()]),
                })
                .collect(),
        }
    }
}

/// `Σ_{i ∈ subset} a_iᵀ b_i` per layer, from an existing trace.
///
/// Samples are accumulated in the order given; no backward pass is run.
pub fn grad_from_trace(trace: &LayerTrace, subset: &[usize]) -> Result<ModelParams> {
    for &i in subset {
        trace.check_index(i)?;
    }
    let t = trace.seq_len;
    let mut out = trace.zero_params();
    for (layer, acc) in trace.layers.iter().zip(&mut out.layers) {
        let d_out = layer.out_grads.cols();
        let d_in = layer.inputs.cols();
        par::for_each_row(acc.weight.data_mut(), d_out, |j, grad_row| {
            for &i in subset {
                for r in i * t..(i + 1) * t {
                    let a = layer.inputs.data()[r * d_in + j];
                    if a != 0.0 {
                        crate::numerics::axpy(a, layer.out_grads.row(r), grad_row);
                    }
                }
            }
        });
        if let Some(bias) = &mut acc.bias {
            for &i in subset {
                for r in i * t..(i + 1) * t {
                    bias.iter_mut().zip(layer.out_grads.row(r)).for_each(|(o, v)| *o += v);
                }
            }
        }
    }
    Ok(out)
}
