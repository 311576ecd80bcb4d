use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Example, Target};
use crate::numerics::{sample_batch, SeededRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    GaussianMixture,
    DomainMixture,
    NearDuplicateProbe,
}

impl FromStr for GeneratorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian-mixture" => Ok(GeneratorKind::GaussianMixture),
            "domain-mixture" => Ok(GeneratorKind::DomainMixture),
            "near-duplicate-probe" => Ok(GeneratorKind::NearDuplicateProbe),
            _ => Err(format!("unknown task `{s}`")),
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::GaussianMixture => "gaussian-mixture",
            GeneratorKind::DomainMixture => "domain-mixture",
            GeneratorKind::NearDuplicateProbe => "near-duplicate-probe",
        })
    }
}

/// Parameters of a synthetic classification task.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTaskSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    /// Fraction of training labels replaced by a different class.
    pub noise: f64,
    /// Domain proportions (domain mixture only).
    pub proportions: Vec<f64>,
    pub seed: u64,
    /// Clean validation examples to draw. For the probe task the first
    /// validation example is the probe itself.
    pub n_val: usize,
    /// Index of the training example the probe copies.
    pub probe_source: usize,
    /// Norm of the perturbation added to the probe.
    pub probe_delta: f64,
}

impl SyntheticTaskSpec {
    pub fn gaussian_mixture(n: usize, dim: usize, classes: usize, noise: f64, seed: u64) -> Self {
        SyntheticTaskSpec {
            kind: GeneratorKind::GaussianMixture,
            n,
            dim,
            classes,
            noise,
            proportions: vec![1.0],
            seed,
            n_val: 200,
            probe_source: 0,
            probe_delta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.classes < 2 || self.dim < self.classes {
            return Err(Error::invalid(format!(
                "need 2 <= classes <= dim, got classes={} dim={}",
                self.classes, self.dim
            )));
        }
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::invalid(format!("noise rate {} must be in [0, 0.5)", self.noise)));
        }
        if self.proportions.is_empty() || self.proportions.iter().any(|p| p.is_nan() || *p < 0.0) {
            return Err(Error::invalid("domain proportions must be non-negative"));
        }
        let total: f64 = self.proportions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("domain proportions sum to {total}, not 1")));
        }
        if self.kind == GeneratorKind::NearDuplicateProbe {
            if self.probe_source >= self.n {
                return Err(Error::invalid("probe source is outside the training set"));
            }
            if !(self.probe_delta >= 0.0 && self.probe_delta.is_finite()) {
                return Err(Error::invalid("probe delta must be non-negative"));
            }
        }
        Ok(())
    }
}

/// A generated task with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedTask {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    /// Labels before corruption.
    pub true_labels: Vec<usize>,
    /// Whether each training label was corrupted.
    pub flipped: Vec<bool>,
}

const TRAIN_STREAM: u64 = 10;
const NOISE_STREAM: u64 = 11;
const VAL_STREAM: u64 = 12;
const DOMAIN_STREAM: u64 = 13;
const PROBE_STREAM: u64 = 14;

/// Pairwise distance between class means.
pub const CLASS_SEPARATION: f64 = 3.0;
/// Norm of each domain's mean shift.
pub const DOMAIN_SHIFT: f64 = 1.5;

/// Counts per domain summing to `n`, by largest remainder.
pub fn stratified_counts(n: usize, proportions: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = proportions.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut left = n - counts.iter().sum::<usize>();
    for &d in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[d] += 1;
        left -= 1;
    }
    counts
}

fn point(rng: &mut SeededRng, label: usize, dim: usize, shift: Option<&[f64]>) -> Vec<f64> {
    let scale = CLASS_SEPARATION / std::f64::consts::SQRT_2;
    (0..dim)
        .map(|j| {
            let mean = if j == label { scale } else { 0.0 } + shift.map_or(0.0, |s| s[j]);
            mean + rng.normal()
        })
        .collect()
}

/// Deterministic in `spec` (including its seed).
pub fn generate(spec: &SyntheticTaskSpec) -> Result<GeneratedTask> {
    spec.validate()?;
    let (n, dim, c) = (spec.n, spec.dim, spec.classes);

    let domain_count = if spec.kind == GeneratorKind::DomainMixture { spec.proportions.len() } else { 1 };
    let mut shift_rng = SeededRng::with_stream(spec.seed, DOMAIN_STREAM);
    let shifts: Vec<Vec<f64>> = (0..domain_count)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| shift_rng.normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x * DOMAIN_SHIFT / norm).collect()
        })
        .collect();
    let domain_of: Vec<Option<usize>> = if spec.kind == GeneratorKind::DomainMixture {
        stratified_counts(n, &spec.proportions)
            .iter()
            .enumerate()
            .flat_map(|(d, &k)| std::iter::repeat_n(Some(d), k))
            .collect()
    } else {
        vec![None; n]
    };

    let mut rng = SeededRng::with_stream(spec.seed, TRAIN_STREAM);
    let true_labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    let features: Vec<Vec<f64>> =
        (0..n).map(|i| point(&mut rng, true_labels[i], dim, domain_of[i].map(|d| shifts[d].as_slice()))).collect();

    let mut flipped = vec![false; n];
    let mut labels = true_labels.clone();
    let n_flip = (spec.noise * n as f64).round() as usize;
    if n_flip > 0 {
        let mut noise_rng = SeededRng::with_stream(spec.seed, NOISE_STREAM);
        for i in sample_batch(&mut noise_rng, n, n_flip)? {
            labels[i] = (labels[i] + 1 + noise_rng.below(c as u64 - 1) as usize) % c;
            flipped[i] = true;
        }
    }
    let train: Vec<Example> = (0..n)
        .map(|i| {
            let ex = Example::new(i, features[i].clone(), Target::class(labels[i]));
            match domain_of[i] {
                Some(d) => ex.with_domain(domain_name(d)),
                None => ex,
            }
        })
        .collect();

    let mut val = Vec::with_capacity(spec.n_val + 1);
    if spec.kind == GeneratorKind::NearDuplicateProbe {
        let src = &train[spec.probe_source];
        let mut probe = Example::new(n, src.features.clone(), src.target.clone());
        if spec.probe_delta > 0.0 {
            let mut prng = SeededRng::with_stream(spec.seed, PROBE_STREAM);
            let dir: Vec<f64> = (0..dim).map(|_| prng.normal()).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            probe.features.iter_mut().zip(&dir).for_each(|(x, d)| *x += spec.probe_delta * d / norm);
        }
        val.push(probe);
    }
    let mut val_rng = SeededRng::with_stream(spec.seed, VAL_STREAM);
    let first_val_id = n + val.len();
    for j in 0..spec.n_val {
        // Validation examples come from the first domain.
        let label = j % c;
        let f = point(&mut val_rng, label, dim, (domain_count > 1).then(|| shifts[0].as_slice()));
        let ex = Example::new(first_val_id + j, f, Target::class(label));
        val.push(if domain_count > 1 { ex.with_domain(domain_name(0)) } else { ex });
    }
    Ok(GeneratedTask { train, val, true_labels, flipped })
}

pub fn domain_name(d: usize) -> String {
    format!("domain_{d}")
}
