use std::io::Write;

use anyhow::{bail, Result};
use inrun_core::datasets::{
    domain_composition, domain_totals, generate, save_composition, GeneratorKind, SyntheticTaskSpec,
};
use inrun_core::model::Example;
use inrun_core::numerics::SeededRng;
use inrun_core::oracle::{loglog_slope, save_taylor_csv, taylor_error_report};
use inrun_core::shapley::Order;
use inrun_core::trainer::{clean_and_retrain, enrichment, runtime_bench, train_with_attribution, Attribution};
use inrun_core::verify::{run_verification, Fault};

use super::{save_table, Ctx, VerificationFailed};

pub fn verify(inject_sign_flip: bool, quiet: bool) -> Result<()> {
    let fault = inject_sign_flip.then_some(Fault::SignFlip);
    let outcomes = run_verification(fault);
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if !quiet {
        let mut out = std::io::stdout().lock();
        for o in &outcomes {
            let mark = if o.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{mark} {:<48} {} [{:.2?}]", o.name, o.detail, o.elapsed);
        }
        let _ = writeln!(out, "{}/{} checks passed", outcomes.len() - failed, outcomes.len());
    }
    if failed > 0 {
        bail!(VerificationFailed(failed));
    }
    Ok(())
}

fn first_target(val: &[Example]) -> Result<&Example> {
    match val.first() {
        Some(v) => Ok(v),
        None => bail!(inrun_core::Error::InvalidArgument("no validation target".into())),
    }
}

pub fn taylor_error(ctx: &Ctx) -> Result<()> {
    let mut config = ctx.config.train_config()?;
    config.attribution = Attribution::None;
    let (train, val, _) = ctx.config.load_data()?;
    // Expand around the trained parameters rather than the initialization.
    let run = train_with_attribution(&config, &train, &val)?;
    let batch: Vec<&Example> = train.iter().take(config.batch_size.min(16)).collect();
    let mut rng = SeededRng::with_stream(config.seed, 20);
    let rows = taylor_error_report(
        &run.params,
        &config.model,
        &batch,
        &ctx.config.etas,
        first_target(&val)?,
        20,
        0.2,
        &mut rng,
    )?;
    save_taylor_csv(&ctx.path("taylor.csv"), &rows)?;
    for order in [1u8, 2] {
        let pts: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.order == order).filter_map(|r| Some((r.eta, r.trimmed_mean_rel_err?))).collect();
        for (eta, err) in &pts {
            ctx.say(format!("order {order}  eta {eta:.0e}  trimmed mean relative error {err:.3e}"));
        }
        match loglog_slope(&pts) {
            Some(s) => ctx.say(format!("order {order}: log-log slope {s:.3}")),
            None => ctx.say(format!("order {order}: slope undefined")),
        }
    }
    Ok(())
}

pub fn clean(ctx: &Ctx) -> Result<()> {
    let config = ctx.config.train_config()?;
    if config.attribution == Attribution::None {
        bail!(inrun_core::Error::InvalidArgument("clean needs attribution = first, second or naive".into()));
    }
    let (train, val, task) = ctx.config.load_data()?;
    let original = train_with_attribution(&config, &train, &val)?;
    let report = clean_and_retrain(&config, &train, &val, &original)?;
    let n = report.original_val_loss.len().max(report.cleaned_val_loss.len());
    let rows: Vec<String> = (0..n)
        .map(|t| {
            let f = |c: &Vec<f64>| c.get(t).map_or(String::new(), |v| format!("{v:.16e}"));
            format!("{t},{},{}", f(&report.original_val_loss), f(&report.cleaned_val_loss))
        })
        .collect();
    save_table(&ctx.path("cleaning.csv"), "iteration,original_val_loss,cleaned_val_loss", &rows)?;
    ctx.say(format!(
        "removed {} of {} examples ({:.1}%)",
        report.removed.len(),
        train.len(),
        100.0 * report.fraction_removed
    ));
    if let Some(task) = task.filter(|t| t.flipped.iter().any(|f| *f)) {
        if let Some(e) = enrichment(&report.removed, &task.flipped) {
            ctx.say(format!("flipped labels are {e:.2}x enriched among removed examples"));
        }
    }
    let show = |v: Option<usize>| v.map_or("never".to_string(), |i| i.to_string());
    ctx.say(format!("threshold validation loss {:.6}", report.threshold));
    ctx.say(format!(
        "iterations to threshold: original {}, cleaned {}",
        show(report.original_iters),
        show(report.cleaned_iters)
    ));
    if let Some(s) = report.iteration_saving() {
        ctx.say(format!("iteration saving {:.1}%", 100.0 * s));
    }
    Ok(())
}

pub fn bench(ctx: &Ctx) -> Result<()> {
    let config = ctx.config.train_config()?;
    let (train, val, _) = ctx.config.load_data()?;
    let rows = runtime_bench(&config, &train, &val, ctx.config.reps.max(5))?;
    let lines: Vec<String> = rows
        .iter()
        .map(|r| format!("{},{:.9},{:.4},{}", r.mode, r.median.as_secs_f64(), r.ratio_to_plain, r.passes_per_iteration))
        .collect();
    save_table(&ctx.path("bench.csv"), "mode,median_seconds,ratio_to_plain,backward_passes_per_iteration", &lines)?;
    for r in &rows {
        ctx.say(format!(
            "{:<7} median {:>10.3?}  {:>7.2}x plain  {} passes/iter",
            r.mode.to_string(),
            r.median,
            r.ratio_to_plain,
            r.passes_per_iteration
        ));
    }
    Ok(())
}

pub fn rank_probe(ctx: &Ctx) -> Result<()> {
    let mut config = ctx.config.train_config()?;
    config.attribution = Attribution::Second;
    let Some(base) = ctx.config.task_spec().filter(|s| s.kind == GeneratorKind::NearDuplicateProbe) else {
        bail!(inrun_core::Error::InvalidArgument("rank-probe needs task = near-duplicate-probe".into()));
    };
    let mut rows = Vec::new();
    for &delta in &ctx.config.deltas {
        let task = generate(&SyntheticTaskSpec { probe_delta: delta, ..base.clone() })?;
        let run = train_with_attribution(&config, &task.train, &task.val[..1])?;
        let ledger = run.ledger.expect("attribution enabled");
        let src = base.probe_source;
        let (r1, r2) = (ledger.rank_of(src, Order::First), ledger.rank_of(src, Order::Second));
        let show = |r: Option<usize>| r.map_or(String::new(), |v| v.to_string());
        rows.push(format!("{delta},{},{},{}", show(r1), show(r2), ledger.times_sampled(src)));
        ctx.say(format!(
            "delta {delta:<8} source rank: first-order {}  second-order {}  (of {})",
            show(r1),
            show(r2),
            task.train.len()
        ));
    }
    save_table(&ctx.path("rank_probe.csv"), "delta,rank_first,rank_second,times_sampled", &rows)?;
    Ok(())
}

pub fn compose(ctx: &Ctx) -> Result<()> {
    let mut config = ctx.config.train_config()?;
    config.log_iterations = true;
    if config.attribution == Attribution::None {
        config.attribution = Attribution::First;
    }
    let (train, val, _) = ctx.config.load_data()?;
    let run = train_with_attribution(&config, &train, &val)?;
    let ledger = run.ledger.expect("attribution enabled");
    save_composition(&ctx.path("composition.csv"), &domain_composition(&ledger, &train)?)?;
    for (domain, total) in domain_totals(&ledger, &train) {
        let name = if domain.is_empty() { "(untagged)" } else { &domain };
        ctx.say(format!("{name:<12} {total:+.6e}"));
    }
    ctx.say(format!("total {:+.6e}", ledger.total_value()));
    Ok(())
}
