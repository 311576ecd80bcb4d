use anyhow::Result;
use inrun_core::datasets::save_scores;
use inrun_core::model::save_checkpoint;
use inrun_core::trainer::{train_with_attribution, Attribution};

use super::{save_curves, Ctx};

pub fn train(ctx: &Ctx) -> Result<()> {
    let mut config = ctx.config.train_config()?;
    config.attribution = Attribution::None;
    let (train, val, _) = ctx.config.load_data()?;
    let run = train_with_attribution(&config, &train, &val)?;
    save_curves(&ctx.path("curves.csv"), &run)?;
    save_checkpoint(&ctx.path("model.ckpt"), &run.params)?;
    ctx.say(format!("trained {} iterations; final validation loss {:.6}", config.iterations, run.final_val_loss()));
    Ok(())
}

pub fn attribute(ctx: &Ctx) -> Result<()> {
    let config = ctx.config.train_config()?;
    let (train, val, _) = ctx.config.load_data()?;
    let run = train_with_attribution(&config, &train, &val)?;
    save_curves(&ctx.path("curves.csv"), &run)?;
    save_checkpoint(&ctx.path("model.ckpt"), &run.params)?;
    match &run.ledger {
        Some(ledger) => {
            save_scores(&ctx.path("scores.csv"), ledger, &train)?;
            ctx.say(format!("validation loss {:.6} -> {:.6}", run.initial_val_loss, run.final_val_loss()));
            ctx.say(format!("total approximated loss reduction: {:.16e}", run.total_predicted_reduction()));
            ctx.say(format!("sum of {} values: {:.16e}", config.attribution, ledger.total_value()));
        }
        None => ctx.say("attribution = none: wrote curves only"),
    }
    Ok(())
}
