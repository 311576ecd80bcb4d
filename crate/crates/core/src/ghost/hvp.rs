use crate::error::{Error, Result};
use crate::model::{forward, Example, LayerParams, LossKind, ModelParams, ModelSpec};
use crate::numerics::{dot, matmul, Matrix2D};

/// Hessian-vector product `∇²ℓ(w, z_val) · u`, shaped like the parameters.
pub type HvpVector = ModelParams;

/// Exact Hessian-vector product of one example's loss by forward-mode
/// differentiation of the backward pass (the R-operator).
///
/// Exact for identity and tanh activations; for ReLU it is the Hessian of the
/// active linear region.
pub fn hvp(params: &ModelParams, spec: &ModelSpec, val: &Example, u: &ModelParams) -> Result<HvpVector> {
    hvp_trace(params, spec, &[val], u)?.materialize(0)
}

/// One layer of an [`HvpTrace`]: the usual `a`, `b` plus their directional
/// derivatives `Ra`, `Rb` along `u`.
#[derive(Clone, Debug)]
pub struct HvpLayer {
    pub inputs: Matrix2D,
    pub out_grads: Matrix2D,
    pub r_inputs: Matrix2D,
    pub r_out_grads: Matrix2D,
    pub has_bias: bool,
}

/// R-operator sweep over a stack of examples along one direction `u`.
///
/// Row `v`'s Hessian-vector product is `Σ_t Ra_tᵀ b_t + a_tᵀ Rb_t` per
/// layer, which [`HvpTrace::materialize`] forms and
/// [`ghost_hvp_dots`](crate::ghost::ghost_hvp_dots) contracts without forming.
#[derive(Clone, Debug)]
pub struct HvpTrace {
    pub layers: Vec<HvpLayer>,
    pub seq_len: usize,
    n: usize,
}

impl HvpTrace {
    pub fn n_samples(&self) -> usize {
        self.n
    }

    fn block<'a>(&self, m: &'a Matrix2D, v: usize) -> &'a [f64] {
        m.row_block(v * self.seq_len, self.seq_len)
    }

    /// `Σ_t Rb_t` for sample `v` at `layer`.
    pub(crate) fn bias_part(&self, layer: usize, v: usize) -> Vec<f64> {
        let rb = &self.layers[layer].r_out_grads;
        let mut out = vec![0.0; rb.cols()];
        for row in self.block(rb, v).chunks(rb.cols()) {
            out.iter_mut().zip(row).for_each(|(o, x)| *o += x);
        }
        out
    }

    /// Row-major `d_in x d_out` weight block of sample `v`'s product.
    pub(crate) fn weight_part(&self, layer: usize, v: usize) -> Vec<f64> {
        let l = &self.layers[layer];
        let (d_in, d_out) = (l.inputs.cols(), l.out_grads.cols());
        let (a, b) = (self.block(&l.inputs, v), self.block(&l.out_grads, v));
        let (ra, rb) = (self.block(&l.r_inputs, v), self.block(&l.r_out_grads, v));
        let mut m = vec![0.0; d_in * d_out];
        for t in 0..self.seq_len {
            let (bt, rbt) = (&b[t * d_out..(t + 1) * d_out], &rb[t * d_out..(t + 1) * d_out]);
            for j in 0..d_in {
                let row = &mut m[j * d_out..(j + 1) * d_out];
                crate::numerics::axpy(ra[t * d_in + j], bt, row);
                crate::numerics::axpy(a[t * d_in + j], rbt, row);
            }
        }
        m
    }

    /// `∇²ℓ_v · u` for sample `v`, shaped like the parameters.
    pub fn materialize(&self, v: usize) -> Result<HvpVector> {
        if v >= self.n {
            return Err(Error::UnknownSample { index: v, available: self.n });
        }
        let layers = (0..self.layers.len())
            .map(|i| {
                let l = &self.layers[i];
                let weight = Matrix2D::new(l.inputs.cols(), l.out_grads.cols(), self.weight_part(i, v))?;
                Ok(LayerParams { weight, bias: l.has_bias.then(|| self.bias_part(i, v)) })
            })
            .collect::<Result<Vec<_>>>()?;
        let out = ModelParams { layers };
        if !out.is_finite() {
            return Err(Error::NonFinite("hvp"));
        }
        Ok(out)
    }
}

/// Batched R-operator pass: one forward and one backward sweep over all of
/// `examples`, each row differentiated along `u`.
pub fn hvp_trace(params: &ModelParams, spec: &ModelSpec, examples: &[&Example], u: &ModelParams) -> Result<HvpTrace> {
    if !u.same_shape(params) {
        return Err(Error::dims("hvp", "direction does not match parameter shapes"));
    }
    let fwd = forward(params, spec, examples)?;
    let inputs = fwd.inputs();
    let pre = fwd.pre_activations();
    let n_layers = spec.n_layers();
    let rows = spec.seq_len * examples.len();

    // Forward sweep of directional derivatives.
    let mut r_inputs: Vec<Matrix2D> = Vec::with_capacity(n_layers);
    let mut r_pre: Vec<Matrix2D> = Vec::with_capacity(n_layers);
    let mut ra = Matrix2D::zeros(rows, spec.input_dim());
    for i in 0..n_layers {
        let (p, d) = (&params.layers[i], &u.layers[i]);
        let mut rs = matmul(&ra, &p.weight)?;
        rs.axpy(1.0, &matmul(&inputs[i], &d.weight)?)?;
        if let Some(db) = &d.bias {
            for r in 0..rows {
                rs.row_mut(r).iter_mut().zip(db).for_each(|(v, b)| *v += b);
            }
        }
        let next = if i + 1 < n_layers {
            let act = spec.activations[i];
            let mut n = rs.clone();
            n.data_mut().iter_mut().zip(pre[i].data()).for_each(|(v, s)| *v *= act.derivative(*s));
            n
        } else {
            Matrix2D::zeros(0, 0)
        };
        r_inputs.push(std::mem::replace(&mut ra, next));
        r_pre.push(rs);
    }

    let mut b = fwd.output_grads();
    let rs_out = &r_pre[n_layers - 1];
    let mut rb = match spec.loss {
        LossKind::Mse => rs_out.clone(),
        LossKind::SoftmaxCrossEntropy => {
            let out = fwd.outputs();
            let mut rb = Matrix2D::zeros(rows, out.cols());
            let mut p = vec![0.0; out.cols()];
            for r in 0..rows {
                crate::model::softmax_into(out.row(r), &mut p);
                let rsr = rs_out.row(r);
                let mean = dot(&p, rsr);
                rb.row_mut(r).iter_mut().zip(p.iter().zip(rsr)).for_each(|(o, (pk, rk))| *o = pk * (rk - mean));
            }
            rb
        }
    };

    // Backward sweep of the gradient and its directional derivative.
    let mut grads: Vec<(Matrix2D, Matrix2D)> = Vec::with_capacity(n_layers);
    for i in (0..n_layers).rev() {
        if i > 0 {
            let w = &params.layers[i].weight;
            let wt = w.transpose();
            let e = matmul(&b, &wt)?;
            let mut re = matmul(&rb, &wt)?;
            re.axpy(1.0, &matmul(&b, &u.layers[i].weight.transpose())?)?;
            let act = spec.activations[i - 1];
            let s = pre[i - 1].data();
            let rs = r_pre[i - 1].data();
            let mut next_b = e.clone();
            next_b.data_mut().iter_mut().zip(s).for_each(|(v, si)| *v *= act.derivative(*si));
            let mut next_rb = re;
            for (k, v) in next_rb.data_mut().iter_mut().enumerate() {
                *v = *v * act.derivative(s[k]) + e.data()[k] * act.second_derivative(s[k]) * rs[k];
            }
            grads.push((std::mem::replace(&mut b, next_b), std::mem::replace(&mut rb, next_rb)));
        } else {
            grads.push((
                std::mem::replace(&mut b, Matrix2D::zeros(0, 0)),
                std::mem::replace(&mut rb, Matrix2D::zeros(0, 0)),
            ));
        }
    }
    grads.reverse();
    let layers = grads
        .into_iter()
        .zip(inputs.iter().cloned().zip(r_inputs))
        .enumerate()
        .map(|(i, ((out_grads, r_out_grads), (inputs, r_inputs)))| HvpLayer {
            inputs,
            out_grads,
            r_inputs,
            r_out_grads,
            has_bias: spec.bias[i],
        })
        .collect();
    Ok(HvpTrace { layers, seq_len: spec.seq_len, n: examples.len() })
}
