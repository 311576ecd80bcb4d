use crate::error::{Error, Result};
use crate::model::LayerTrace;
use crate::numerics::{dot, Matrix2D};
use crate::par;

/// How a layer's per-pair contribution is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DotBranch {
    /// `Gram` when `2T² < d_in·d_out`, otherwise `Outer`.
    Auto,
    /// `Σ_{t1,t2} (a_i a_jᵀ)[t1,t2] · (b_i b_jᵀ)[t1,t2]`; no per-sample gradient is formed.
    Gram,
    /// Form each sample's `a_iᵀ b_i` block once, then take Frobenius products.
    Outer,
}

impl DotBranch {
    pub fn resolve(self, seq_len: usize, d_in: usize, d_out: usize) -> DotBranch {
        match self {
            DotBranch::Auto if 2 * seq_len * seq_len < d_in * d_out => DotBranch::Gram,
            DotBranch::Auto => DotBranch::Outer,
            other => other,
        }
    }
}

/// All pairwise per-sample gradient inner products of a trace, summed over
/// layers. Rows and columns follow trace order: training samples first,
/// validation targets last.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseDots {
    n_train: usize,
    values: Matrix2D,
}

impl PairwiseDots {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn size(&self) -> usize {
        self.values.rows()
    }

    pub fn matrix(&self) -> &Matrix2D {
        &self.values
    }

    /// `∇ℓ_val(v) · ∇ℓ_i` for every training sample `i`.
    pub fn val_row(&self, v: usize) -> Vec<f64> {
        self.values.row(self.n_train + v)[..self.n_train].to_vec()
    }
}

pub(crate) fn check_trace(trace: &LayerTrace) -> Result<()> {
    let rows = trace.n_samples() * trace.seq_len;
    for (i, l) in trace.layers.iter().enumerate() {
        if l.inputs.rows() != rows || l.out_grads.rows() != rows {
            return Err(Error::dims("ghost", format!("layer {i} does not cover {} samples", trace.n_samples())));
        }
        if let Some(next) = trace.layers.get(i + 1) {
            if next.inputs.cols() != l.out_grads.cols() {
                return Err(Error::dims(
                    "ghost",
                    format!("layer {i} output width disagrees with layer {} input", i + 1),
                ));
            }
        }
    }
    Ok(())
}

/// Gradient dot products for every `(rows[r], cols[c])` pair, as a
/// `rows.len() x cols.len()` matrix.
pub fn ghost_cross_dots(trace: &LayerTrace, rows: &[usize], cols: &[usize], branch: DotBranch) -> Result<Matrix2D> {
    check_trace(trace)?;
    for &i in rows.iter().chain(cols) {
        trace.check_index(i)?;
    }
    let t = trace.seq_len;
    let plans: Vec<LayerPlan> = trace
        .layers
        .iter()
        .enumerate()
        .map(|(li, l)| {
            let (d_in, d_out) = (l.inputs.cols(), l.out_grads.cols());
            let resolved = branch.resolve(t, d_in, d_out);
            let mut involved: Vec<usize> = rows.iter().chain(cols).copied().collect();
            involved.sort_unstable();
            involved.dedup();
            let blocks = if resolved == DotBranch::Outer {
                let mats = par::map_range(involved.len(), |k| outer_block(trace, li, involved[k]));
                Some((involved.clone(), mats))
            } else {
                None
            };
            let bias = l.has_bias.then(|| {
                let sums = par::map_range(involved.len(), |k| trace.bias_grad(li, involved[k]));
                (involved, sums)
            });
            LayerPlan { branch: resolved, blocks, bias }
        })
        .collect();

    let mut out = Matrix2D::zeros(rows.len(), cols.len());
    par::for_each_row(out.data_mut(), cols.len(), |r, out_row| {
        let i = rows[r];
        for (c, o) in out_row.iter_mut().enumerate() {
            let j = cols[c];
            let mut acc = 0.0;
            for (li, plan) in plans.iter().enumerate() {
                acc += match plan.branch {
                    DotBranch::Outer => {
                        let (ids, mats) = plan.blocks.as_ref().expect("outer blocks");
                        dot(&mats[lookup(ids, i)], &mats[lookup(ids, j)])
                    }
                    _ => gram_pair(trace, li, i, j),
                };
                if let Some((ids, sums)) = &plan.bias {
                    acc += dot(&sums[lookup(ids, i)], &sums[lookup(ids, j)]);
                }
            }
            *o = acc;
        }
    });
    if !out.is_finite() {
        return Err(Error::NonFinite("ghost dot products"));
    }
    Ok(out)
}

struct LayerPlan {
    branch: DotBranch,
    blocks: Option<(Vec<usize>, Vec<Vec<f64>>)>,
    bias: Option<(Vec<usize>, Vec<Vec<f64>>)>,
}

fn lookup(ids: &[usize], i: usize) -> usize {
    ids.binary_search(&i).expect("sample was planned")
}

/// `Σ_{t1,t2} (a_i[t1]·a_j[t2]) (b_i[t1]·b_j[t2])`.
fn gram_pair(trace: &LayerTrace, layer: usize, i: usize, j: usize) -> f64 {
    let l = &trace.layers[layer];
    let (d_in, d_out) = (l.inputs.cols(), l.out_grads.cols());
    let (ai, aj) = (trace.inputs(layer, i), trace.inputs(layer, j));
    let (bi, bj) = (trace.out_grads(layer, i), trace.out_grads(layer, j));
    let t = trace.seq_len;
    let mut acc = 0.0;
    for t1 in 0..t {
        let a1 = &ai[t1 * d_in..(t1 + 1) * d_in];
        let b1 = &bi[t1 * d_out..(t1 + 1) * d_out];
        for t2 in 0..t {
            let aa = dot(a1, &aj[t2 * d_in..(t2 + 1) * d_in]);
            if aa != 0.0 {
                acc += aa * dot(b1, &bj[t2 * d_out..(t2 + 1) * d_out]);
            }
        }
    }
    acc
}

/// `a_iᵀ b_i` for one layer, flattened row-major (`d_in x d_out`).
fn outer_block(trace: &LayerTrace, layer: usize, i: usize) -> Vec<f64> {
    let l = &trace.layers[layer];
    let (d_in, d_out) = (l.inputs.cols(), l.out_grads.cols());
    let (a, b) = (trace.inputs(layer, i), trace.out_grads(layer, i));
    let mut m = vec![0.0; d_in * d_out];
    for t in 0..trace.seq_len {
        let bt = &b[t * d_out..(t + 1) * d_out];
        for j in 0..d_in {
            let x = a[t * d_in + j];
            crate::numerics::axpy(x, bt, &mut m[j * d_out..(j + 1) * d_out]);
        }
    }
    m
}

/// Every pairwise gradient dot product, choosing the per-layer path
/// automatically.
pub fn ghost_pairwise_dots(trace: &LayerTrace) -> Result<PairwiseDots> {
    ghost_pairwise_dots_with(trace, DotBranch::Auto)
}

/// As [`ghost_pairwise_dots`] with a forced branch. The upper triangle is
/// computed and mirrored, so the result is exactly symmetric.
pub fn ghost_pairwise_dots_with(trace: &LayerTrace, branch: DotBranch) -> Result<PairwiseDots> {
    let all: Vec<usize> = (0..trace.n_samples()).collect();
    let mut values = ghost_cross_dots(trace, &all, &all, branch)?;
    let n = all.len();
    for i in 0..n {
        for j in 0..i {
            let v = values.get(j, i);
            values.set(i, j, v);
        }
    }
    Ok(PairwiseDots { n_train: trace.n_train, values })
}

/// `∇ℓ_val(v) · ∇ℓ_i` for each validation target `v` (rows) and training
/// sample `i` (columns). This is the only part of the pairwise matrix the
/// first-order value needs.
pub fn ghost_val_dots(trace: &LayerTrace) -> Result<Matrix2D> {
    let vals: Vec<usize> = (trace.n_train..trace.n_samples()).collect();
    let train: Vec<usize> = (0..trace.n_train).collect();
    ghost_cross_dots(trace, &vals, &train, DotBranch::Auto)
}
