use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// First derivative. ReLU uses 0 at the kink.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity | Activation::Relu => 0.0,
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    /// `½‖s − y‖²` per position.
    Mse,
    /// Softmax cross-entropy per position, in nats.
    SoftmaxCrossEntropy,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "softmax-cross-entropy" | "cross-entropy" | "ce" => Ok(LossKind::SoftmaxCrossEntropy),
            other => Err(Error::invalid(format!("unknown loss `{other}`"))),
        }
    }
}

/// Architecture of a stacked linear network.
///
/// Layer `i` maps `dims[i]` to `dims[i + 1]`; hidden layers are followed by
/// `activations[i]`, the last layer feeds the loss directly. With
/// `seq_len > 1` every position shares the same weights and the loss is
/// summed over positions.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub loss: LossKind,
    pub seq_len: usize,
    pub bias: Vec<bool>,
}

impl ModelSpec {
    /// Every hidden layer uses `activation`; every layer has a bias.
    pub fn new(dims: Vec<usize>, activation: Activation, loss: LossKind) -> Result<Self> {
        let layers = dims.len().saturating_sub(1);
        let spec = ModelSpec {
            activations: vec![activation; layers.saturating_sub(1)],
            bias: vec![true; layers],
            dims,
            loss,
            seq_len: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_seq_len(mut self, seq_len: usize) -> Result<Self> {
        self.seq_len = seq_len;
        self.validate()?;
        Ok(self)
    }

    pub fn with_bias(mut self, bias: bool) -> Self {
        self.bias = vec![bias; self.n_layers()];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::invalid("model needs at least one layer"));
        }
        if self.dims.contains(&0) {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        if self.seq_len == 0 {
            return Err(Error::invalid("sequence length must be at least 1"));
        }
        if self.activations.len() != self.n_layers() - 1 {
            return Err(Error::invalid(format!(
                "{} hidden activations given for {} layers",
                self.activations.len(),
                self.n_layers()
            )));
        }
        if self.bias.len() != self.n_layers() {
            return Err(Error::invalid("one bias flag per layer required"));
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    /// Flattened feature length of one example.
    pub fn feature_len(&self) -> usize {
        self.dims[0] * self.seq_len
    }

    pub fn num_params(&self) -> usize {
        (0..self.n_layers())
            .map(|i| self.dims[i] * self.dims[i + 1] + if self.bias[i] { self.dims[i + 1] } else { 0 })
            .sum()
    }
}

/// Supervision for one example. A single entry (or a single output-width
/// vector) is broadcast to every position.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Class(Vec<usize>),
    Regression(Vec<f64>),
}

impl Target {
    pub fn class(c: usize) -> Self {
        Target::Class(vec![c])
    }

    pub fn value(v: f64) -> Self {
        Target::Regression(vec![v])
    }
}

/// One training or validation point.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: usize,
    pub features: Vec<f64>,
    pub target: Target,
    pub domain: Option<String>,
}

impl Example {
    pub fn new(id: usize, features: Vec<f64>, target: Target) -> Self {
        Example { id, features, target, domain: None }
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = Some(domain.into());
        self
    }
}
