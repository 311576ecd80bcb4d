use crate::error::{Error, Result};
use crate::ghost::dots::check_trace;
use crate::ghost::hvp::{hvp_trace, HvpTrace};
use crate::ghost::DotBranch;
use crate::model::{grad_from_trace, Example, LayerTrace, ModelParams, ModelSpec};
use crate::numerics::{dot, Matrix2D};
use crate::par;

/// `∇ℓ_i · V` from the trace, as `Σ_t a_i[t]ᵀ V b_i[t]` per layer plus the
/// bias term. The per-sample gradient is never formed.
pub fn ghost_bilinear(trace: &LayerTrace, i: usize, v: &ModelParams) -> Result<f64> {
    trace.check_index(i)?;
    if v.layers.len() != trace.layers.len() {
        return Err(Error::dims("ghost_bilinear", "layer count differs from trace"));
    }
    for (l, p) in trace.layers.iter().zip(&v.layers) {
        if p.weight.shape() != (l.inputs.cols(), l.out_grads.cols()) || p.bias.is_some() != l.has_bias {
            return Err(Error::dims("ghost_bilinear", "matrix shape differs from trace"));
        }
    }
    Ok(bilinear_unchecked(trace, i, v))
}

fn bilinear_unchecked(trace: &LayerTrace, i: usize, v: &ModelParams) -> f64 {
    let t = trace.seq_len;
    let mut acc = 0.0;
    for (li, (l, p)) in trace.layers.iter().zip(&v.layers).enumerate() {
        let (d_in, d_out) = (l.inputs.cols(), l.out_grads.cols());
        let (a, b) = (trace.inputs(li, i), trace.out_grads(li, i));
        for pos in 0..t {
            let bt = &b[pos * d_out..(pos + 1) * d_out];
            for j in 0..d_in {
                let x = a[pos * d_in + j];
                if x != 0.0 {
                    acc += x * dot(p.weight.row(j), bt);
                }
            }
        }
        if let Some(vb) = &p.bias {
            acc += dot(&trace.bias_grad(li, i), vb);
        }
    }
    acc
}

/// `∇ℓ_iᵀ H_val (Σ_j ∇ℓ_j)` for every `i` in `batch`.
///
/// Forms the batch gradient from the trace, runs one R-operator pass at the
/// validation point along it, then contracts per sample with
/// [`ghost_hvp_dots`].
pub fn ghost_ghg(
    trace: &LayerTrace,
    params: &ModelParams,
    spec: &ModelSpec,
    val: &Example,
    batch: &[usize],
) -> Result<Vec<f64>> {
    let g_sum = grad_from_trace(trace, batch)?;
    let h = hvp_trace(params, spec, &[val], &g_sum)?;
    Ok(ghost_hvp_dots(trace, batch, &h)?.row(0).to_vec())
}

/// `∇ℓ_iᵀ (∇²ℓ_v · u)` for every R-traced sample `v` (rows) and every `i`
/// in `batch` (columns).
pub fn ghost_hvp_dots(trace: &LayerTrace, batch: &[usize], h: &HvpTrace) -> Result<Matrix2D> {
    ghost_hvp_dots_with(trace, batch, h, DotBranch::Auto)
}

/// As [`ghost_hvp_dots`] with a forced branch. `Gram` uses
/// `Σ_{s,t} (a_i[s]·Ra_v[t])(b_i[s]·b_v[t]) + (a_i[s]·a_v[t])(b_i[s]·Rb_v[t])`;
/// `Outer` forms the product's weight block per `v`.
pub fn ghost_hvp_dots_with(trace: &LayerTrace, batch: &[usize], h: &HvpTrace, branch: DotBranch) -> Result<Matrix2D> {
    check_trace(trace)?;
    for &i in batch {
        trace.check_index(i)?;
    }
    if h.seq_len != trace.seq_len || h.layers.len() != trace.layers.len() {
        return Err(Error::dims("ghost_hvp_dots", "R-trace does not match the backward trace"));
    }
    for (l, r) in trace.layers.iter().zip(&h.layers) {
        if l.inputs.cols() != r.inputs.cols() || l.out_grads.cols() != r.out_grads.cols() || l.has_bias != r.has_bias {
            return Err(Error::dims("ghost_hvp_dots", "layer widths differ between traces"));
        }
    }
    let t = trace.seq_len;
    let n_val = h.n_samples();
    let branches: Vec<DotBranch> =
        h.layers.iter().map(|l| branch.resolve(t, l.inputs.cols(), l.out_grads.cols())).collect();
    let per_val = par::map_range(n_val, |v| {
        let blocks: Vec<Option<Vec<f64>>> =
            branches.iter().enumerate().map(|(li, b)| (*b == DotBranch::Outer).then(|| h.weight_part(li, v))).collect();
        let biases: Vec<Option<Vec<f64>>> =
            h.layers.iter().enumerate().map(|(li, l)| l.has_bias.then(|| h.bias_part(li, v))).collect();
        (blocks, biases)
    });
    let bias_grads: Vec<Vec<Vec<f64>>> = par::map_range(batch.len(), |k| {
        trace
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.has_bias)
            .map(|(li, _)| trace.bias_grad(li, batch[k]))
            .collect()
    });

    let mut out = Matrix2D::zeros(n_val, batch.len());
    par::for_each_row(out.data_mut(), batch.len(), |v, row| {
        let (blocks, biases) = &per_val[v];
        for (c, o) in row.iter_mut().enumerate() {
            let i = batch[c];
            let mut acc = 0.0;
            let mut bias_slot = 0;
            for li in 0..h.layers.len() {
                acc += match &blocks[li] {
                    Some(m) => block_bilinear(trace, li, i, m),
                    None => gram_hvp_pair(trace, h, li, i, v),
                };
                if let Some(rb) = &biases[li] {
                    acc += dot(&bias_grads[c][bias_slot], rb);
                    bias_slot += 1;
                }
            }
            *o = acc;
        }
    });
    if !out.is_finite() {
        return Err(Error::NonFinite("ghost Hessian products"));
    }
    Ok(out)
}

/// `Σ_t a_i[t]ᵀ M b_i[t]` for a row-major `d_in x d_out` block `M`.
fn block_bilinear(trace: &LayerTrace, layer: usize, i: usize, m: &[f64]) -> f64 {
    let l = &trace.layers[layer];
    let (d_in, d_out) = (l.inputs.cols(), l.out_grads.cols());
    let (a, b) = (trace.inputs(layer, i), trace.out_grads(layer, i));
    let mut acc = 0.0;
    for t in 0..trace.seq_len {
        let bt = &b[t * d_out..(t + 1) * d_out];
        for j in 0..d_in {
            let x = a[t * d_in + j];
            if x != 0.0 {
                acc += x * dot(&m[j * d_out..(j + 1) * d_out], bt);
            }
        }
    }
    acc
}

fn gram_hvp_pair(trace: &LayerTrace, h: &HvpTrace, layer: usize, i: usize, v: usize) -> f64 {
    let l = &h.layers[layer];
    let (d_in, d_out) = (l.inputs.cols(), l.out_grads.cols());
    let t = trace.seq_len;
    let (ai, bi) = (trace.inputs(layer, i), trace.out_grads(layer, i));
    let (av, bv) = (l.inputs.row_block(v * t, t), l.out_grads.row_block(v * t, t));
    let (rav, rbv) = (l.r_inputs.row_block(v * t, t), l.r_out_grads.row_block(v * t, t));
    let mut acc = 0.0;
    for s in 0..t {
        let (a1, b1) = (&ai[s * d_in..(s + 1) * d_in], &bi[s * d_out..(s + 1) * d_out]);
        for u in 0..t {
            let (ia, ib) = (u * d_in..(u + 1) * d_in, u * d_out..(u + 1) * d_out);
            let ar = dot(a1, &rav[ia.clone()]);
            if ar != 0.0 {
                acc += ar * dot(b1, &bv[ib.clone()]);
            }
            let aa = dot(a1, &av[ia]);
            if aa != 0.0 {
                acc += aa * dot(b1, &rbv[ib]);
            }
        }
    }
    acc
}

/// [`ghost_bilinear`] for each sample in `batch`.
pub fn ghost_bilinear_batch(trace: &LayerTrace, batch: &[usize], v: &ModelParams) -> Result<Vec<f64>> {
    check_trace(trace)?;
    if let Some(&first) = batch.first() {
        ghost_bilinear(trace, first, v)?;
    }
    for &i in batch {
        trace.check_index(i)?;
    }
    Ok(par::map_range(batch.len(), |k| bilinear_unchecked(trace, batch[k], v)))
}
