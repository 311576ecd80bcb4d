//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use inrun_core::config::ExperimentConfig;
use inrun_core::datasets::{generate, GeneratorKind, SyntheticTaskSpec};
use inrun_core::ghost::{ghost_ghg, ghost_pairwise_dots, ghost_pairwise_dots_with, hvp, DotBranch};
use inrun_core::model::{backward_joint, forward, grad_from_trace, Activation, Example, LossKind, ModelSpec, Target};
use inrun_core::numerics::SeededRng;
use inrun_core::oracle::fixtures::{quadratic_spec, random_examples, random_params, random_spec, refs};
use inrun_core::oracle::reference::{flat_dot, mat_vec, reference_gradient, reference_hessian};
use inrun_core::oracle::{exact_shapley, loglog_slope, reference_attribution_run, taylor_error_report, NaiveBatch};
use inrun_core::shapley::{first_order_step, second_order_step, IterationRecord, Order};
use inrun_core::trainer::{
    clean_and_retrain, enrichment, runtime_bench, train_with_attribution, Attribution, TrainConfig,
};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// `|got − want| / max(1, |want|)`.
fn scaled_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

fn gate(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

fn instance(
    seed: u64,
    act: Activation,
    seq_len: usize,
    n: usize,
) -> (ModelSpec, inrun_core::model::ModelParams, Vec<Example>) {
    let mut rng = SeededRng::new(seed);
    let spec = random_spec(&mut rng, act, seq_len);
    let params = random_params(&spec, &mut rng, 1.0);
    let ex = random_examples(&spec, n, &mut rng, 0);
    (spec, params, ex)
}

fn ghost_equivalence() -> Outcome {
    let start = Instant::now();
    let (mut worst, mut worst_branch) = (0.0f64, 0.0f64);
    let mut instances = 0;
    for seed in 0..120u64 {
        let mut pick = SeededRng::new(10_000 + seed);
        let t = 1 + pick.below(4) as usize;
        let n = 2 + pick.below(7) as usize;
        let act = [Activation::Tanh, Activation::Identity, Activation::Relu][seed as usize % 3];
        let (spec, params, ex) = instance(seed, act, t, n);
        let trace = forward(&params, &spec, &refs(&ex)).unwrap().into_trace(&params);
        let auto = ghost_pairwise_dots(&trace).unwrap();
        let gram = ghost_pairwise_dots_with(&trace, DotBranch::Gram).unwrap();
        let outer = ghost_pairwise_dots_with(&trace, DotBranch::Outer).unwrap();
        let grads: Vec<Vec<f64>> = ex.iter().map(|e| reference_gradient(&spec, &params, e).unwrap()).collect();
        let norms: Vec<f64> = grads.iter().map(|g| flat_dot(g, g).sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                let scale = norms[i] * norms[j];
                if scale == 0.0 {
                    continue;
                }
                worst = worst.max((auto.get(i, j) - flat_dot(&grads[i], &grads[j])).abs() / scale);
                worst_branch = worst_branch.max((gram.get(i, j) - outer.get(i, j)).abs() / scale);
            }
        }
        instances += 1;
    }
    let elapsed = start.elapsed();
    gate(
        worst <= 1e-10 && worst_branch <= 1e-12 && within(elapsed, Duration::from_secs(30)),
        format!(
            "{instances} instances, max norm-relative error {worst:.2e} (<= 1e-10), branch gap {worst_branch:.2e} (<= 1e-12), {elapsed:.2?} (< 30s)"
        ),
    )
}

fn closed_form_vs_enumeration() -> Outcome {
    let start = Instant::now();
    let (mut worst1, mut worst2) = (0.0f64, 0.0f64);
    for b in 2..=8usize {
        for rep in 0..3u64 {
            let seq = 1 + rep as usize % 2;
            let (spec, params, ex) = instance(200 + 10 * b as u64 + rep, Activation::Tanh, seq, b + 1);
            let (batch, val) = (refs(&ex[..b]), &ex[b]);
            let trace = backward_joint(&params, &spec, &batch, &[val]).unwrap();
            let dots = ghost_pairwise_dots(&trace).unwrap();
            let idx: Vec<usize> = (0..b).collect();
            let record = IterationRecord::new(0, idx.clone(), 0.3, 0).unwrap();
            let first = first_order_step(&dots, &record).unwrap();
            let ghg = ghost_ghg(&trace, &params, &spec, val, &idx).unwrap();
            let second = second_order_step(&dots, &ghg, &record).unwrap();
            let naive = NaiveBatch::new(&spec, &params, &batch, val, true).unwrap();
            let want1 = exact_shapley(&naive.first_order_utility(record.lr)).unwrap();
            let want2 = exact_shapley(&naive.second_order_utility(record.lr)).unwrap();
            for i in 0..b {
                worst1 = worst1.max(scaled_err(first[i], want1[i]));
                worst2 = worst2.max(scaled_err(second[i], want2[i]));
            }
        }
    }
    let elapsed = start.elapsed();
    gate(
        worst1 <= 1e-10 && worst2 <= 1e-9 && within(elapsed, Duration::from_secs(60)),
        format!("batch 2..8: first-order error {worst1:.2e} (<= 1e-10), second-order {worst2:.2e} (<= 1e-9), {elapsed:.2?} (< 60s)"),
    )
}

fn axiom_suite() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // Efficiency: contributions sum to the approximated batch utility.
    let mut eff = 0.0f64;
    for seed in 0..10u64 {
        let (spec, params, ex) = instance(300 + seed, Activation::Tanh, 1 + seed as usize % 3, 7);
        let (batch, val) = (refs(&ex[..6]), &ex[6]);
        let trace = backward_joint(&params, &spec, &batch, &[val]).unwrap();
        let dots = ghost_pairwise_dots(&trace).unwrap();
        let idx: Vec<usize> = (0..6).collect();
        let record = IterationRecord::new(0, idx.clone(), 0.2, 0).unwrap();
        let first = first_order_step(&dots, &record).unwrap();
        let ghg = ghost_ghg(&trace, &params, &spec, val, &idx).unwrap();
        let second = second_order_step(&dots, &ghg, &record).unwrap();
        let naive = NaiveBatch::new(&spec, &params, &batch, val, true).unwrap();
        let u1 = naive.first_order(&idx, record.lr);
        let u12 = u1 + 0.5 * naive.second_order_term(&idx, record.lr);
        eff = eff.max(scaled_err(first.iter().sum(), u1)).max(scaled_err(second.iter().sum(), u12));
    }
    ok &= eff <= 1e-9;
    notes.push(format!("efficiency {eff:.1e}"));

    // Symmetry: an exact copy under a different id gets an identical value.
    let (spec, params, mut ex) = instance(320, Activation::Tanh, 2, 6);
    let mut copy = ex[1].clone();
    copy.id = 99;
    ex.insert(2, copy);
    let (batch, val) = (refs(&ex[..6]), &ex[6]);
    let trace = backward_joint(&params, &spec, &batch, &[val]).unwrap();
    let dots = ghost_pairwise_dots(&trace).unwrap();
    let idx: Vec<usize> = (0..6).collect();
    let record = IterationRecord::new(0, idx.clone(), 0.2, 0).unwrap();
    let first = first_order_step(&dots, &record).unwrap();
    let second = second_order_step(&dots, &ghost_ghg(&trace, &params, &spec, val, &idx).unwrap(), &record).unwrap();
    let symmetric = first[1] == first[2] && second[1] == second[2];
    ok &= symmetric;
    notes.push(format!("symmetry {}", if symmetric { "exact" } else { "broken" }));

    // Null player: a regression target equal to the network output has a
    // zero gradient.
    let spec = ModelSpec::new(vec![3, 4, 2], Activation::Tanh, LossKind::Mse).unwrap();
    let mut rng = SeededRng::new(330);
    let params = random_params(&spec, &mut rng, 1.0);
    let mut ex = random_examples(&spec, 6, &mut rng, 0);
    let out = forward(&params, &spec, &[&ex[3]]).unwrap().outputs().row(0).to_vec();
    ex[3].target = Target::Regression(out);
    let (batch, val) = (refs(&ex[..5]), &ex[5]);
    let trace = backward_joint(&params, &spec, &batch, &[val]).unwrap();
    let dots = ghost_pairwise_dots(&trace).unwrap();
    let idx: Vec<usize> = (0..5).collect();
    let record = IterationRecord::new(0, idx.clone(), 0.2, 0).unwrap();
    let first = first_order_step(&dots, &record).unwrap();
    let second = second_order_step(&dots, &ghost_ghg(&trace, &params, &spec, val, &idx).unwrap(), &record).unwrap();
    let null = first[3] == 0.0 && second[3] == 0.0;
    ok &= null;
    notes.push(format!("null player {}", if null { "exact" } else { "nonzero" }));

    // Linearity: values toward two targets equal the sum of single-target runs.
    let spec = ModelSpec::new(vec![4, 6, 3], Activation::Tanh, LossKind::SoftmaxCrossEntropy).unwrap();
    let mut rng = SeededRng::new(340);
    let data = random_examples(&spec, 40, &mut rng, 0);
    let val = random_examples(&spec, 2, &mut rng, 1000);
    let config = TrainConfig {
        iterations: 15,
        batch_size: 8,
        lr: 0.05,
        attribution: Attribution::Second,
        ..TrainConfig::new(spec)
    };
    let ledger = |v: &[Example]| train_with_attribution(&config, &data, v).unwrap().ledger.unwrap();
    let (both, a, b) = (ledger(&val), ledger(&val[..1]), ledger(&val[1..]));
    let mut lin = 0.0f64;
    for i in 0..data.len() {
        lin = lin.max(scaled_err(both.value_first(i), a.value_first(i) + b.value_first(i)));
        let s = |l: &inrun_core::shapley::ValueLedger| l.value_second(i).unwrap();
        lin = lin.max(scaled_err(s(&both), s(&a) + s(&b)));
    }
    ok &= lin <= 1e-10;
    notes.push(format!("linearity {lin:.1e}"));

    gate(ok, notes.join(", ") + " (tolerances 1e-9 / exact / exact / 1e-10)")
}

fn taylor_scaling() -> Outcome {
    let cfg = load("taylor.conf");
    let mut config = cfg.train_config().unwrap();
    config.attribution = Attribution::None;
    let (train, val, _) = cfg.load_data().unwrap();
    let run = train_with_attribution(&config, &train, &val).unwrap();
    let batch = refs(&train[..16]);
    let etas = [1e-1, 1e-2, 1e-3, 1e-4];
    let rows = taylor_error_report(
        &run.params,
        &config.model,
        &batch,
        &etas,
        &val[0],
        20,
        0.2,
        &mut SeededRng::with_stream(config.seed, 20),
    )
    .unwrap();
    let points = |order: u8| -> Vec<(f64, f64)> {
        rows.iter().filter(|r| r.order == order).filter_map(|r| Some((r.eta, r.trimmed_mean_rel_err?))).collect()
    };
    let (p1, p2) = (points(1), points(2));
    let s1 = loglog_slope(&p1).unwrap_or(f64::NAN);
    let s2 = loglog_slope(&p2).unwrap_or(f64::NAN);
    let at = |p: &[(f64, f64)]| p.iter().find(|(e, _)| *e == 1e-4).map_or(f64::NAN, |x| x.1);

    let spec = quadratic_spec(4, 2);
    let mut rng = SeededRng::new(400);
    let params = random_params(&spec, &mut rng, 1.0);
    let ex = random_examples(&spec, 9, &mut rng, 0);
    let quad = taylor_error_report(&params, &spec, &refs(&ex[..8]), &etas, &ex[8], 20, 0.2, &mut rng).unwrap();
    let quad_err = quad.iter().filter(|r| r.order == 2).filter_map(|r| r.trimmed_mean_rel_err).fold(0.0, f64::max);

    gate(
        s1 >= 0.9 && s2 >= 1.8 && quad_err <= 1e-10,
        format!(
            "slopes first {s1:.3} (>= 0.9), second {s2:.3} (>= 1.8); quadratic second-order error {quad_err:.1e} (<= 1e-10); \
             at eta 1e-4: first {:.2}% (reference < 10%), second {:.4}% (reference < 4%)",
            100.0 * at(&p1),
            100.0 * at(&p2)
        ),
    )
}

fn hvp_correctness() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let (spec, params, ex) = instance(500 + seed, Activation::Tanh, 1 + seed as usize % 3, 1);
        let mut rng = SeededRng::new(900 + seed);
        let u = random_params(&spec, &mut rng, 1.0);
        let got = hvp(&params, &spec, &ex[0], &u).unwrap().flatten();
        let eps = 1e-5;
        let grad_at = |s: f64| {
            let mut w = params.clone();
            w.axpy(s * eps, &u).unwrap();
            let tr = forward(&w, &spec, &[&ex[0]]).unwrap().into_trace(&w);
            grad_from_trace(&tr, &[0]).unwrap().flatten()
        };
        let (gp, gm) = (grad_at(1.0), grad_at(-1.0));
        let diff: f64 = got.iter().zip(gp.iter().zip(&gm)).map(|(g, (p, m))| (g - (p - m) / (2.0 * eps)).powi(2)).sum();
        let norm = flat_dot(&got, &got).sqrt();
        if norm > 0.0 {
            worst = worst.max(diff.sqrt() / norm);
        }
    }

    let mut row_sum = 0.0f64;
    for seed in 0..10u64 {
        let (spec, params, ex) = instance(600 + seed, Activation::Tanh, 1 + seed as usize % 3, 9);
        let (batch, val) = (refs(&ex[..8]), &ex[8]);
        let trace = backward_joint(&params, &spec, &batch, &[val]).unwrap();
        let idx: Vec<usize> = (0..8).collect();
        let ghg = ghost_ghg(&trace, &params, &spec, val, &idx).unwrap();
        let g = grad_from_trace(&trace, &idx).unwrap().flatten();
        let want = flat_dot(&g, &mat_vec(&reference_hessian(&spec, &params, val).unwrap(), &g));
        row_sum = row_sum.max(scaled_err(ghg.iter().sum(), want));
    }
    gate(
        worst <= 1e-5 && row_sum <= 1e-9,
        format!("50 tanh instances, hvp vs central differences {worst:.2e} (<= 1e-5); GHG row-sum identity {row_sum:.2e} (<= 1e-9)"),
    )
}

fn cost_model() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let spec = ModelSpec::new(vec![4, 6, 3], Activation::Tanh, LossKind::SoftmaxCrossEntropy).unwrap();
    let mut rng = SeededRng::new(700);
    let data = random_examples(&spec, 60, &mut rng, 0);
    let val = random_examples(&spec, 3, &mut rng, 1000);
    let base = TrainConfig { iterations: 25, batch_size: 8, lr: 0.05, ..TrainConfig::new(spec) };
    let mode = |m| TrainConfig { attribution: m, ..base.clone() };
    let plain = train_with_attribution(&mode(Attribution::None), &data, &val).unwrap();
    let mut bitwise = true;
    for m in [Attribution::First, Attribution::Second, Attribution::Naive] {
        let run = train_with_attribution(&mode(m), &data, &val).unwrap();
        bitwise &= run.params == plain.params && run.train_loss == plain.train_loss;
    }
    ok &= bitwise;
    notes.push(format!("parameters {}", if bitwise { "bitwise identical" } else { "DIFFER" }));

    let cfg = load("bench.conf");
    let config = cfg.train_config().unwrap();
    let (train, val, _) = cfg.load_data().unwrap();
    let b = config.batch_size;
    let rows = runtime_bench(&config, &train, &val, cfg.reps.max(5)).unwrap();
    let passes: Vec<f64> = rows.iter().map(|r| r.passes_per_iteration).collect();
    let want_passes = [1.0, 1.0, 2.0, b as f64 + 1.0];
    let passes_ok = passes == want_passes;
    ok &= passes_ok;
    notes.push(format!("passes/iter plain {} first {} second {} naive {}", passes[0], passes[1], passes[2], passes[3]));

    let ratio = |m: Attribution| rows.iter().find(|r| r.mode == m).unwrap().ratio_to_plain;
    let (r1, r2, rn) = (ratio(Attribution::First), ratio(Attribution::Second), ratio(Attribution::Naive));
    ok &= r1 <= 1.5 && r2 <= 3.0 && rn >= 0.5 * b as f64;
    notes.push(format!(
        "batch {b}: first {r1:.2}x (<= 1.5), second {r2:.2}x (<= 3), naive {rn:.2}x (>= {:.0})",
        0.5 * b as f64
    ));
    gate(ok, notes.join("; "))
}

fn cleaning() -> Outcome {
    let start = Instant::now();
    let cfg = load("clean.conf");
    let config = cfg.train_config().unwrap();
    let (train, val, task) = cfg.load_data().unwrap();
    let task = task.expect("generated task");
    let flipped = task.flipped.iter().filter(|f| **f).count() as f64 / train.len() as f64;
    let original = train_with_attribution(&config, &train, &val).unwrap();
    let report = clean_and_retrain(&config, &train, &val, &original).unwrap();
    let enrich = enrichment(&report.removed, &task.flipped).unwrap_or(0.0);
    let faster = matches!((report.original_iters, report.cleaned_iters), (Some(o), Some(c)) if c < o);
    let elapsed = start.elapsed();
    let show = |x: Option<usize>| x.map_or("never".to_string(), |v| v.to_string());
    gate(
        train.len() == 5000 && enrich >= 3.0 && faster && within(elapsed, Duration::from_secs(300)),
        format!(
            "n {}, {:.0}% flipped, {} removed, enrichment {enrich:.2}x (>= 3), iterations to original final loss {} -> {} \
             ({:.1}% fewer; at-scale reference ~25%), {elapsed:.1?} (< 5 min)",
            train.len(),
            100.0 * flipped,
            report.removed.len(),
            show(report.original_iters),
            show(report.cleaned_iters),
            100.0 * report.iteration_saving().unwrap_or(f64::NAN)
        ),
    )
}

fn rank_probe() -> Outcome {
    let cfg = load("rank_probe.conf");
    let mut config = cfg.train_config().unwrap();
    config.attribution = Attribution::Second;
    let spec = cfg.task_spec().expect("probe task");
    assert_eq!(spec.kind, GeneratorKind::NearDuplicateProbe);
    let task = generate(&SyntheticTaskSpec { probe_delta: 0.0, ..spec.clone() }).unwrap();
    let src = spec.probe_source;
    let identical = task.val[0].features == task.train[src].features && task.val[0].target == task.train[src].target;
    let ledger = train_with_attribution(&config, &task.train, &task.val[..1]).unwrap().ledger.unwrap();
    let (r1, r2) = (ledger.rank_of(src, Order::First), ledger.rank_of(src, Order::Second));
    gate(
        identical && task.train.len() >= 1000 && r1 == Some(1) && r2 == Some(1),
        format!(
            "source {src} of {}: rank first-order {r1:?}, second-order {r2:?} (want 1), sampled {} times",
            task.train.len(),
            ledger.times_sampled(src)
        ),
    )
}

fn naive_oracle_run() -> Outcome {
    let spec = ModelSpec::new(vec![3, 5, 3], Activation::Tanh, LossKind::SoftmaxCrossEntropy).unwrap();
    let mut rng = SeededRng::new(900);
    let data = random_examples(&spec, 30, &mut rng, 0);
    let val = random_examples(&spec, 2, &mut rng, 1000);
    let mut worst = 0.0f64;
    let mut sampled_ok = true;
    for attribution in [Attribution::First, Attribution::Second] {
        let config = TrainConfig {
            iterations: 50,
            batch_size: 6,
            lr: 0.05,
            attribution,
            seed: 11,
            ..TrainConfig::new(spec.clone())
        };
        let fast = train_with_attribution(&config, &data, &val).unwrap().ledger.unwrap();
        let slow = reference_attribution_run(&config, &data, &val).unwrap();
        for i in 0..data.len() {
            sampled_ok &= fast.times_sampled(i) == slow.times_sampled(i);
            for k in 0..val.len() {
                worst = worst.max(scaled_err(fast.first_sum(k, i), slow.first_sum(k, i)));
                if let (Some(a), Some(b)) = (fast.second_sum(k, i), slow.second_sum(k, i)) {
                    worst = worst.max(scaled_err(a, b));
                }
            }
        }
    }
    gate(
        worst <= 1e-9 && sampled_ok,
        format!(
            "50 iterations, both orders, 2 targets: max ledger error {worst:.2e} (<= 1e-9), sampling counts {}",
            if sampled_ok { "equal" } else { "DIFFER" }
        ),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("ghost equivalence", ghost_equivalence),
        ("closed form = enumeration", closed_form_vs_enumeration),
        ("axiom suite", axiom_suite),
        ("Taylor scaling", taylor_scaling),
        ("HVP correctness", hvp_correctness),
        ("non-interference and cost model", cost_model),
        ("cleaning analog", cleaning),
        ("rank probe", rank_probe),
        ("naive-oracle equivalence", naive_oracle_run),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let (mark, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("[{mark}] {} {name}: {detail} [{:.2?}]", n + 1, start.elapsed());
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
