use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::numerics::{axpy, dot, Matrix2D, SeededRng};

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    /// `d_in x d_out`.
    pub weight: Matrix2D,
    pub bias: Option<Vec<f64>>,
}

/// Per-layer weights and biases. Gradients, Hessian-vector products and
/// update directions share this shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
}

impl ModelParams {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let layers = (0..spec.n_layers())
            .map(|i| LayerParams {
                weight: Matrix2D::zeros(spec.dims[i], spec.dims[i + 1]),
                bias: spec.bias[i].then(|| vec![0.0; spec.dims[i + 1]]),
            })
            .collect();
        ModelParams { layers }
    }

    /// Gaussian weights with standard deviation `scale / sqrt(d_in)`, zero biases.
    pub fn init(spec: &ModelSpec, rng: &mut SeededRng, scale: f64) -> Self {
        let mut params = ModelParams::zeros(spec);
        for layer in &mut params.layers {
            let std = scale / (layer.weight.rows() as f64).sqrt();
            for w in layer.weight.data_mut() {
                *w = std * rng.normal();
            }
        }
        params
    }

    pub fn zeros_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| LayerParams {
                weight: Matrix2D::zeros(l.weight.rows(), l.weight.cols()),
                bias: l.bias.as_ref().map(|b| vec![0.0; b.len()]),
            })
            .collect();
        ModelParams { layers }
    }

    pub fn matches_spec(&self, spec: &ModelSpec) -> bool {
        self.layers.len() == spec.n_layers()
            && self.layers.iter().enumerate().all(|(i, l)| {
                l.weight.shape() == (spec.dims[i], spec.dims[i + 1])
                    && l.bias.as_ref().map(Vec::len) == spec.bias[i].then_some(spec.dims[i + 1])
            })
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weight.shape() == b.weight.shape() && a.bias.as_ref().map(Vec::len) == b.bias.as_ref().map(Vec::len)
            })
    }

    pub(crate) fn check_shape(&self, other: &ModelParams, op: &'static str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::dims(op, "parameter shapes differ"))
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.data().len() + l.bias.as_ref().map_or(0, Vec::len)).sum()
    }

    /// Inner product over every weight and bias, layer by layer.
    pub fn dot(&self, other: &ModelParams) -> Result<f64> {
        self.check_shape(other, "ModelParams::dot")?;
        let mut acc = 0.0;
        for (a, b) in self.layers.iter().zip(&other.layers) {
            acc += dot(a.weight.data(), b.weight.data());
            if let (Some(x), Some(y)) = (&a.bias, &b.bias) {
                acc += dot(x, y);
            }
        }
        Ok(acc)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ModelParams) -> Result<()> {
        self.check_shape(other, "ModelParams::axpy")?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            axpy(alpha, b.weight.data(), a.weight.data_mut());
            if let (Some(x), Some(y)) = (&mut a.bias, &b.bias) {
                axpy(alpha, y, x);
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for l in &mut self.layers {
            l.weight.scale(alpha);
            if let Some(b) = &mut l.bias {
                b.iter_mut().for_each(|v| *v *= alpha);
            }
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.layers.iter().fold(0.0, |m, l| {
            let b = l.bias.as_ref().map_or(0.0, |b| b.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
            m.max(l.weight.max_abs()).max(b)
        })
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.as_ref().is_none_or(|b| b.iter().all(|v| v.is_finite())))
    }

    /// Layer by layer: weights row-major, then the bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            if let Some(b) = &l.bias {
                out.extend_from_slice(b);
            }
        }
        out
    }

    /// Inverse of [`ModelParams::flatten`].
    pub fn from_flat(spec: &ModelSpec, flat: &[f64]) -> Result<Self> {
        if flat.len() != spec.num_params() {
            return Err(Error::dims(
                "ModelParams::from_flat",
                format!("expected {} values, got {}", spec.num_params(), flat.len()),
            ));
        }
        let mut params = ModelParams::zeros(spec);
        let mut at = 0;
        for l in &mut params.layers {
            let n = l.weight.data().len();
            l.weight.data_mut().copy_from_slice(&flat[at..at + n]);
            at += n;
            if let Some(b) = &mut l.bias {
                let n = b.len();
                b.copy_from_slice(&flat[at..at + n]);
                at += n;
            }
        }
        Ok(params)
    }
}
