use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Learning-rate schedule over iterations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    Constant,
    /// Ramps linearly from `lr/warmup_iters` to `lr` over the first
    /// `warmup_iters` iterations, then stays at `lr`.
    LinearWarmup {
        warmup_iters: usize,
    },
}

impl Schedule {
    pub fn lr_at(&self, base: f64, iteration: usize) -> f64 {
        match *self {
            Schedule::Constant => base,
            Schedule::LinearWarmup { warmup_iters } if iteration < warmup_iters => {
                base * (iteration + 1) as f64 / warmup_iters as f64
            }
            Schedule::LinearWarmup { .. } => base,
        }
    }
}

impl FromStr for Schedule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "constant" {
            return Ok(Schedule::Constant);
        }
        let n = s
            .strip_prefix("linear-warmup:")
            .ok_or_else(|| format!("unknown schedule `{s}` (expected constant or linear-warmup:N)"))?;
        match n.parse::<usize>() {
            Ok(w) if w > 0 => Ok(Schedule::LinearWarmup { warmup_iters: w }),
            _ => Err(format!("warmup length must be a positive integer, got `{n}`")),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Constant => write!(f, "constant"),
            Schedule::LinearWarmup { warmup_iters } => write!(f, "linear-warmup:{warmup_iters}"),
        }
    }
}

/// What the trainer computes besides the update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attribution {
    None,
    First,
    Second,
    /// First-order values from explicitly materialized per-sample gradients,
    /// one backward pass per batch member. A cost baseline.
    Naive,
}

impl FromStr for Attribution {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Attribution::None),
            "first" => Ok(Attribution::First),
            "second" => Ok(Attribution::Second),
            "naive" => Ok(Attribution::Naive),
            _ => Err(format!("unknown attribution `{s}` (expected none, first, second or naive)")),
        }
    }
}

impl fmt::Display for Attribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Attribution::None => "none",
            Attribution::First => "first",
            Attribution::Second => "second",
            Attribution::Naive => "naive",
        })
    }
}

/// Plain SGD with a summed-gradient update `w ← w − lr_t · Σ_B ∇ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: Schedule,
    pub attribution: Attribution,
    pub model: ModelSpec,
    /// Initial weights are drawn with standard deviation `init_scale/√d_in`.
    pub init_scale: f64,
    /// Keep per-iteration contributions in the ledger.
    pub log_iterations: bool,
}

impl TrainConfig {
    pub fn new(model: ModelSpec) -> Self {
        TrainConfig {
            seed: 0,
            iterations: 100,
            batch_size: 16,
            lr: 0.01,
            schedule: Schedule::Constant,
            attribution: Attribution::First,
            model,
            init_scale: 1.0,
            log_iterations: false,
        }
    }

    pub fn validate(&self, n_train: usize) -> Result<()> {
        self.model.validate()?;
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if self.batch_size == 0 || self.batch_size > n_train {
            return Err(Error::invalid(format!("batch size {} must be in 1..={n_train}", self.batch_size)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive and finite, got {}", self.lr)));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::invalid("init_scale must be non-negative and finite"));
        }
        Ok(())
    }

    pub fn lr_at(&self, iteration: usize) -> f64 {
        self.schedule.lr_at(self.lr, iteration)
    }
}
