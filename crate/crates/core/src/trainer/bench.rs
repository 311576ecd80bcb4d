use std::time::Duration;

use crate::error::{Error, Result};
use crate::model::Example;
use crate::trainer::{train_with_attribution, Attribution, TrainConfig};

/// Median training cost of one attribution mode.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub mode: Attribution,
    pub median: Duration,
    /// `median / plain median`.
    pub ratio_to_plain: f64,
    pub passes_per_iteration: f64,
}

pub const BENCH_MODES: [Attribution; 4] =
    [Attribution::None, Attribution::First, Attribution::Second, Attribution::Naive];

/// Times plain, first-order, second-order and naive training on the same
/// config. One warm-up run per mode, then `runs` (at least 5) timed runs,
/// interleaved across modes. Evaluation time is excluded.
pub fn runtime_bench(
    config: &TrainConfig,
    dataset: &[Example],
    valset: &[Example],
    runs: usize,
) -> Result<Vec<BenchRow>> {
    if runs < 5 {
        return Err(Error::invalid("runtime_bench needs at least 5 runs"));
    }
    let configs: Vec<TrainConfig> =
        BENCH_MODES.iter().map(|&m| TrainConfig { attribution: m, log_iterations: false, ..config.clone() }).collect();
    let mut passes = vec![0.0; configs.len()];
    for (c, p) in configs.iter().zip(&mut passes) {
        let a = train_with_attribution(c, dataset, valset)?;
        *p = a.backward_passes.iter().sum::<usize>() as f64 / a.backward_passes.len() as f64;
    }
    let mut samples = vec![Vec::with_capacity(runs); configs.len()];
    for _ in 0..runs {
        for (c, s) in configs.iter().zip(&mut samples) {
            s.push(train_with_attribution(c, dataset, valset)?.timings.step_total());
        }
    }
    let medians: Vec<Duration> = samples
        .into_iter()
        .map(|mut s| {
            s.sort();
            let n = s.len();
            if n % 2 == 1 {
                s[n / 2]
            } else {
                (s[n / 2 - 1] + s[n / 2]) / 2
            }
        })
        .collect();
    let plain = medians[0].as_secs_f64();
    Ok(BENCH_MODES
        .iter()
        .zip(medians)
        .zip(passes)
        .map(|((&mode, median), p)| BenchRow {
            mode,
            median,
            ratio_to_plain: median.as_secs_f64() / plain,
            passes_per_iteration: p,
        })
        .collect())
}
