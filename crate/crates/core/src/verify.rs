//! Self-check suite: every fast path against its independent oracle on
//! small random instances.

use std::time::{Duration, Instant};

use crate::error::Result;
use crate::ghost::{ghost_ghg, ghost_pairwise_dots, ghost_pairwise_dots_with, hvp, DotBranch};
use crate::model::{backward_joint, forward, grad_from_trace, Activation, Example, LossKind, ModelParams, ModelSpec};
use crate::numerics::SeededRng;
use crate::oracle::fixtures::{quadratic_spec, random_examples, random_params, random_spec, refs};
use crate::oracle::reference::{flat_dot, reference_gradient};
use crate::oracle::{exact_shapley, permutation_shapley, taylor_error_report, NaiveBatch, UtilityFn, UtilityKind};
use crate::shapley::{first_order_step, second_order_step, IterationRecord};
use crate::trainer::{train_with_attribution, Attribution, TrainConfig};

/// Deliberate corruption of one check's fixture, to confirm the suite can
/// fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of the closed-form first-order contributions before
    /// comparing them with enumeration.
    SignFlip,
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error, or the failure message.
    pub detail: String,
    pub elapsed: Duration,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

fn instance(seed: u64, act: Activation, seq_len: usize, n: usize) -> (ModelSpec, ModelParams, Vec<Example>) {
    let mut rng = SeededRng::new(seed);
    let spec = random_spec(&mut rng, act, seq_len);
    let params = random_params(&spec, &mut rng, 1.0);
    let ex = random_examples(&spec, n, &mut rng, 0);
    (spec, params, ex)
}

/// Returns the worst error seen; the check passes when it is within `tol`.
type Check = fn(Option<Fault>) -> Result<f64>;

fn ghost_dots(_: Option<Fault>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for seed in 0..30 {
        let (spec, params, ex) = instance(seed, Activation::Tanh, 1 + seed as usize % 4, 6);
        let trace = forward(&params, &spec, &refs(&ex))?.into_trace(&params);
        let dots = ghost_pairwise_dots(&trace)?;
        let grads = ex.iter().map(|e| reference_gradient(&spec, &params, e)).collect::<Result<Vec<_>>>()?;
        for i in 0..ex.len() {
            for j in 0..ex.len() {
                let want = flat_dot(&grads[i], &grads[j]);
                let scale = (flat_dot(&grads[i], &grads[i]) * flat_dot(&grads[j], &grads[j])).sqrt();
                if scale > 0.0 {
                    worst = worst.max((dots.get(i, j) - want).abs() / scale);
                }
            }
        }
    }
    Ok(worst)
}

fn branch_agreement(_: Option<Fault>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for seed in 0..30 {
        let (spec, params, ex) = instance(100 + seed, Activation::Relu, 1 + seed as usize % 4, 5);
        let trace = forward(&params, &spec, &refs(&ex))?.into_trace(&params);
        let a = ghost_pairwise_dots_with(&trace, DotBranch::Gram)?;
        let b = ghost_pairwise_dots_with(&trace, DotBranch::Outer)?;
        for (x, y) in a.matrix().data().iter().zip(b.matrix().data()) {
            worst = worst.max(rel_err(*x, *y));
        }
    }
    Ok(worst)
}

fn closed_forms_vs_enumeration(fault: Option<Fault>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let spec = ModelSpec::new(vec![3, 3, 2], Activation::Tanh, LossKind::SoftmaxCrossEntropy)?;
    for b in 2..=6 {
        let mut rng = SeededRng::new(200 + b as u64);
        let params = random_params(&spec, &mut rng, 1.0);
        let ex = random_examples(&spec, b + 1, &mut rng, 0);
        let (batch, val) = (refs(&ex[..b]), &ex[b]);
        let lr = 0.1;
        let trace = backward_joint(&params, &spec, &batch, &[val])?;
        let dots = ghost_pairwise_dots(&trace)?;
        let rec = IterationRecord::new(0, (0..b).collect(), lr, 0)?;
        let idx: Vec<usize> = (0..b).collect();
        let mut first = first_order_step(&dots, &rec)?;
        if fault == Some(Fault::SignFlip) {
            first.iter_mut().for_each(|v| *v = -*v);
        }
        let second = second_order_step(&dots, &ghost_ghg(&trace, &params, &spec, val, &idx)?, &rec)?;
        let naive = NaiveBatch::new(&spec, &params, &batch, val, true)?;
        let p1 = exact_shapley(&naive.first_order_utility(lr))?;
        let p2 = exact_shapley(&naive.second_order_utility(lr))?;
        for i in 0..b {
            worst = worst.max(rel_err(first[i], p1[i])).max(rel_err(second[i], p2[i]));
        }
    }
    Ok(worst)
}

fn efficiency(_: Option<Fault>) -> Result<f64> {
    let (spec, params, ex) = instance(300, Activation::Tanh, 2, 7);
    let (batch, val) = (refs(&ex[..6]), &ex[6]);
    let trace = backward_joint(&params, &spec, &batch, &[val])?;
    let dots = ghost_pairwise_dots(&trace)?;
    let rec = IterationRecord::new(0, (0..6).collect(), 0.05, 0)?;
    let idx: Vec<usize> = (0..6).collect();
    let first = first_order_step(&dots, &rec)?;
    let second = second_order_step(&dots, &ghost_ghg(&trace, &params, &spec, val, &idx)?, &rec)?;
    let naive = NaiveBatch::new(&spec, &params, &batch, val, true)?;
    let u1 = naive.first_order(&idx, rec.lr);
    let u12 = u1 + 0.5 * naive.second_order_term(&idx, rec.lr);
    Ok(rel_err(first.iter().sum(), u1).max(rel_err(second.iter().sum(), u12)))
}

fn hvp_finite_differences(_: Option<Fault>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (spec, params, ex) = instance(400 + seed, Activation::Tanh, 1 + seed as usize % 3, 1);
        let mut rng = SeededRng::new(seed);
        let u = random_params(&spec, &mut rng, 1.0);
        let got = hvp(&params, &spec, &ex[0], &u)?.flatten();
        let eps = 1e-5 * (1.0 + params.max_abs());
        let shifted = |s: f64| -> Result<Vec<f64>> {
            let mut w = params.clone();
            w.axpy(s * eps, &u)?;
            reference_gradient(&spec, &w, &ex[0])
        };
        let (gp, gm) = (shifted(1.0)?, shifted(-1.0)?);
        let diff: f64 = got.iter().zip(gp.iter().zip(&gm)).map(|(g, (p, m))| (g - (p - m) / (2.0 * eps)).powi(2)).sum();
        let norm: f64 = got.iter().map(|g| g * g).sum();
        worst = worst.max(diff.sqrt() / (1.0 + norm.sqrt()));
    }
    Ok(worst)
}

fn ghg_row_sum(_: Option<Fault>) -> Result<f64> {
    let (spec, params, ex) = instance(500, Activation::Tanh, 2, 9);
    let (batch, val) = (refs(&ex[..8]), &ex[8]);
    let trace = backward_joint(&params, &spec, &batch, &[val])?;
    let idx: Vec<usize> = (0..8).collect();
    let ghg = ghost_ghg(&trace, &params, &spec, val, &idx)?;
    let g = grad_from_trace(&trace, &idx)?;
    let want = g.dot(&hvp(&params, &spec, val, &g)?)?;
    Ok(rel_err(ghg.iter().sum(), want))
}

fn bookkeeping(_: Option<Fault>) -> Result<f64> {
    let (spec, params, ex) = instance(600, Activation::Tanh, 3, 6);
    let trace = backward_joint(&params, &spec, &refs(&ex[..5]), &refs(&ex[5..]))?;
    let g = grad_from_trace(&trace, &[0, 1, 2, 3, 4])?.flatten();
    let mut want = vec![0.0; g.len()];
    for e in &ex[..5] {
        want.iter_mut().zip(reference_gradient(&spec, &params, e)?).for_each(|(w, x)| *w += x);
    }
    Ok(g.iter().zip(&want).map(|(a, b)| rel_err(*a, *b)).fold(0.0, f64::max))
}

fn non_interference(_: Option<Fault>) -> Result<f64> {
    let (spec, _, ex) = instance(700, Activation::Tanh, 1, 40);
    let config = TrainConfig {
        iterations: 10,
        batch_size: 8,
        lr: 0.05,
        attribution: Attribution::None,
        ..TrainConfig::new(spec)
    };
    let plain = train_with_attribution(&config, &ex[..38], &ex[38..])?;
    let mut worst: f64 = 0.0;
    for mode in [Attribution::First, Attribution::Second] {
        let run = train_with_attribution(&TrainConfig { attribution: mode, ..config.clone() }, &ex[..38], &ex[38..])?;
        if run.params != plain.params {
            worst = f64::INFINITY;
        }
    }
    Ok(worst)
}

fn enumeration_vs_permutations(_: Option<Fault>) -> Result<f64> {
    let mut rng = SeededRng::new(800);
    let w: Vec<f64> = (0..6).map(|_| rng.next_f64()).collect();
    let u = UtilityFn::new(UtilityKind::Synthetic, 6, |s| s.iter().map(|&i| w[i]).sum::<f64>().sqrt());
    let (a, b) = (exact_shapley(&u)?, permutation_shapley(&u)?);
    Ok(a.iter().zip(&b).map(|(x, y)| rel_err(*x, *y)).fold(0.0, f64::max))
}

fn quadratic_taylor(_: Option<Fault>) -> Result<f64> {
    let spec = quadratic_spec(3, 2);
    let mut rng = SeededRng::new(900);
    let params = random_params(&spec, &mut rng, 1.0);
    let ex = random_examples(&spec, 7, &mut rng, 0);
    let rows = taylor_error_report(&params, &spec, &refs(&ex[..6]), &[1e-1, 1e-3], &ex[6], 20, 0.2, &mut rng)?;
    Ok(rows
        .iter()
        .filter(|r| r.order == 2)
        .map(|r| r.trimmed_mean_rel_err.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max))
}

const CHECKS: &[(&str, Check, f64)] = &[
    ("ghost dot products vs explicit gradients", ghost_dots, 1e-10),
    ("gram and outer-product branches agree", branch_agreement, 1e-12),
    ("closed forms equal exact Shapley enumeration", closed_forms_vs_enumeration, 1e-9),
    ("efficiency of both orders", efficiency, 1e-9),
    ("hvp vs finite differences", hvp_finite_differences, 1e-5),
    ("ghg row sum equals full quadratic form", ghg_row_sum, 1e-9),
    ("update gradient from trace vs reference", bookkeeping, 1e-12),
    ("attribution leaves training bitwise unchanged", non_interference, 0.0),
    ("subset enumeration vs permutation average", enumeration_vs_permutations, 1e-12),
    ("second-order expansion exact on quadratic loss", quadratic_taylor, 1e-10),
];

/// Runs every check, optionally with a fault injected.
pub fn run_verification(fault: Option<Fault>) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(name, check, tol)| {
            let start = Instant::now();
            let (passed, detail) = match check(fault) {
                Ok(err) => (err <= tol, format!("max error {err:.3e} (tolerance {tol:.0e})")),
                Err(e) => (false, e.to_string()),
            };
            CheckOutcome { name, passed, detail, elapsed: start.elapsed() }
        })
        .collect()
}
