//! Line-oriented `key = value` experiment files.
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are
//! errors that name the line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::datasets::{generate, load_csv, GeneratedTask, GeneratorKind, SyntheticTaskSpec};
use crate::error::{Error, Result};
use crate::model::{Activation, Example, LossKind, ModelSpec};
use crate::trainer::{Attribution, Schedule, TrainConfig};

pub const KEYS: &[&str] = &[
    "seed",
    "iterations",
    "batch_size",
    "lr",
    "schedule",
    "optimizer",
    "layers",
    "activation",
    "loss",
    "seq_len",
    "bias",
    "init_scale",
    "attribution",
    "val_ids",
    "dataset_path",
    "val_path",
    "out_dir",
    "log_iterations",
    "task",
    "n",
    "dim",
    "classes",
    "noise",
    "domains",
    "n_val",
    "probe_source",
    "deltas",
    "etas",
    "reps",
];

/// Parsed experiment file.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: Schedule,
    pub layers: Option<Vec<usize>>,
    pub activation: Activation,
    pub loss: LossKind,
    pub seq_len: usize,
    pub bias: bool,
    pub init_scale: f64,
    pub attribution: Attribution,
    /// Which validation rows act as attribution targets (default: all).
    pub val_ids: Option<Vec<usize>>,
    pub dataset_path: Option<PathBuf>,
    pub val_path: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub log_iterations: bool,
    pub task: Option<GeneratorKind>,
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    pub noise: f64,
    pub domains: Vec<f64>,
    pub n_val: usize,
    pub probe_source: usize,
    pub deltas: Vec<f64>,
    pub etas: Vec<f64>,
    pub reps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            iterations: 100,
            batch_size: 16,
            lr: 0.01,
            schedule: Schedule::Constant,
            layers: None,
            activation: Activation::Tanh,
            loss: LossKind::SoftmaxCrossEntropy,
            seq_len: 1,
            bias: true,
            init_scale: 1.0,
            attribution: Attribution::First,
            val_ids: None,
            dataset_path: None,
            val_path: None,
            out_dir: None,
            log_iterations: false,
            task: None,
            n: 1000,
            dim: 8,
            classes: 2,
            noise: 0.0,
            domains: vec![1.0],
            n_val: 100,
            probe_source: 0,
            deltas: vec![0.0, 0.1, 1.0],
            etas: vec![1e-1, 1e-2, 1e-3, 1e-4],
            reps: 5,
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Config { line, message: format!("{key}: {e}") })
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(|s| parse_value(line, key, s.trim())).collect()
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config { line, message: format!("{key}: expected true or false, got `{v}`") }),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_in(text, Path::new("."))
    }

    /// Parses `text`, resolving relative paths against `base`.
    pub fn parse_in(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config { line, message: format!("expected `key = value`, got `{content}`") })?;
            if !KEYS.contains(&key) {
                return Err(Error::Config { line, message: format!("unknown key `{key}`") });
            }
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return Err(Error::Config { line, message: format!("`{key}` already set on line {prev}") });
            }
            let path = || base.join(value);
            match key {
                "seed" => cfg.seed = parse_value(line, key, value)?,
                "iterations" => cfg.iterations = parse_value(line, key, value)?,
                "batch_size" => cfg.batch_size = parse_value(line, key, value)?,
                "lr" => cfg.lr = parse_value(line, key, value)?,
                "schedule" => cfg.schedule = parse_value(line, key, value)?,
                "optimizer" if value != "sgd" => {
                    return Err(Error::Config {
                        line,
                        message: format!("optimizer `{value}` is not supported; only plain sgd is"),
                    })
                }
                "optimizer" => {}
                "layers" => cfg.layers = Some(parse_list(line, key, value)?),
                "activation" => cfg.activation = parse_value(line, key, value)?,
                "loss" => cfg.loss = parse_value(line, key, value)?,
                "seq_len" => cfg.seq_len = parse_value(line, key, value)?,
                "bias" => cfg.bias = parse_bool(line, key, value)?,
                "init_scale" => cfg.init_scale = parse_value(line, key, value)?,
                "attribution" => cfg.attribution = parse_value(line, key, value)?,
                "val_ids" => cfg.val_ids = Some(parse_list(line, key, value)?),
                "dataset_path" => cfg.dataset_path = Some(path()),
                "val_path" => cfg.val_path = Some(path()),
                "out_dir" => cfg.out_dir = Some(path()),
                "log_iterations" => cfg.log_iterations = parse_bool(line, key, value)?,
                "task" => cfg.task = Some(parse_value(line, key, value)?),
                "n" => cfg.n = parse_value(line, key, value)?,
                "dim" => cfg.dim = parse_value(line, key, value)?,
                "classes" => cfg.classes = parse_value(line, key, value)?,
                "noise" => cfg.noise = parse_value(line, key, value)?,
                "domains" => cfg.domains = parse_list(line, key, value)?,
                "n_val" => cfg.n_val = parse_value(line, key, value)?,
                "probe_source" => cfg.probe_source = parse_value(line, key, value)?,
                "deltas" => cfg.deltas = parse_list(line, key, value)?,
                "etas" => cfg.etas = parse_list(line, key, value)?,
                "reps" => cfg.reps = parse_value(line, key, value)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
        if cfg.task.is_some() && cfg.dataset_path.is_some() {
            let line = seen["dataset_path"].max(seen["task"]);
            return Err(Error::Config { line, message: "set either `task` or `dataset_path`, not both".into() });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_in(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Network architecture; defaults to one hidden layer of 16 units sized
    /// to the task.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let dims = match &self.layers {
            Some(l) => l.clone(),
            None if self.task.is_some() => vec![self.dim, 16, self.classes],
            None => return Err(Error::invalid("`layers` is required when loading a dataset file")),
        };
        Ok(ModelSpec::new(dims, self.activation, self.loss)?.with_seq_len(self.seq_len)?.with_bias(self.bias))
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            seed: self.seed,
            iterations: self.iterations,
            batch_size: self.batch_size,
            lr: self.lr,
            schedule: self.schedule,
            attribution: self.attribution,
            model: self.model_spec()?,
            init_scale: self.init_scale,
            log_iterations: self.log_iterations,
        })
    }

    pub fn task_spec(&self) -> Option<SyntheticTaskSpec> {
        self.task.map(|kind| SyntheticTaskSpec {
            kind,
            n: self.n,
            dim: self.dim,
            classes: self.classes,
            noise: self.noise,
            proportions: self.domains.clone(),
            seed: self.seed,
            n_val: self.n_val,
            probe_source: self.probe_source,
            probe_delta: self.deltas.first().copied().unwrap_or(0.0),
        })
    }

    /// Training set, validation targets, and the generated task when there is
    /// one.
    pub fn load_data(&self) -> Result<(Vec<Example>, Vec<Example>, Option<GeneratedTask>)> {
        let (train, val, task) = if let Some(spec) = self.task_spec() {
            let task = generate(&spec)?;
            (task.train.clone(), task.val.clone(), Some(task))
        } else if let Some(path) = &self.dataset_path {
            let train = load_csv(path)?;
            let val = match &self.val_path {
                Some(p) => load_csv(p)?,
                None => train.clone(),
            };
            (train, val, None)
        } else {
            return Err(Error::invalid("set `task` or `dataset_path`"));
        };
        let val = match &self.val_ids {
            Some(ids) => ids
                .iter()
                .map(|&i| val.get(i).cloned().ok_or(Error::UnknownSample { index: i, available: val.len() }))
                .collect::<Result<Vec<_>>>()?,
            None => val,
        };
        Ok((train, val, task))
    }
}
