use std::path::Path;

use crate::error::{Error, Result};
use crate::ghost::hvp;
use crate::io::write_atomic;
use crate::model::{forward, grad_from_trace, Example, ModelParams, ModelSpec};
use crate::numerics::SeededRng;
use crate::oracle::LocalGame;

/// Relative error of one Taylor order at one step size.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorRow {
    pub eta: f64,
    pub order: u8,
    /// `None` when every sampled subset had a negligible true utility.
    pub trimmed_mean_rel_err: Option<f64>,
    pub n_subsets_used: usize,
}

/// Utilities below this magnitude are dropped before dividing.
pub const MIN_UTILITY: f64 = 1e-12;

/// Mean after discarding `floor(n·trim/2)` values from each end.
pub fn trimmed_mean(values: &[f64], trim: f64) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = (v.len() as f64 * trim / 2.0).floor() as usize;
    let kept = v.get(k..v.len().saturating_sub(k))?;
    if kept.is_empty() {
        return None;
    }
    Some(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Least-squares slope of `ln y` against `ln x`, over points with `y > 0`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Compares the true one-step loss change with its first- and second-order
/// expansions on `n_subsets` random non-empty subsets of `batch`, shared
/// across all step sizes.
#[allow(clippy::too_many_arguments)]
pub fn taylor_error_report(
    params: &ModelParams,
    spec: &ModelSpec,
    batch: &[&Example],
    etas: &[f64],
    val: &Example,
    n_subsets: usize,
    trim: f64,
    rng: &mut SeededRng,
) -> Result<Vec<TaylorRow>> {
    if batch.is_empty() || batch.len() > 62 {
        return Err(Error::invalid("taylor_error_report needs a batch of 1 to 62 examples"));
    }
    if !(0.0..1.0).contains(&trim) {
        return Err(Error::invalid("trim fraction must be in [0, 1)"));
    }
    let game = LocalGame::new(params, spec, batch, val)?;
    let val_grad = {
        let trace = forward(params, spec, &[val])?.into_trace(params);
        grad_from_trace(&trace, &[0])?
    };
    let n = batch.len();
    let subsets: Vec<Vec<usize>> = (0..n_subsets)
        .map(|_| {
            let mask = 1 + rng.below((1u64 << n) - 1);
            (0..n).filter(|i| mask >> i & 1 == 1).collect()
        })
        .collect();
    // Per subset: g_val·g_S and g_Sᵀ H g_S.
    let terms = subsets
        .iter()
        .map(|s| {
            let g = grad_from_trace(game.trace(), s)?;
            let hg = hvp(params, spec, val, &g)?;
            Ok((val_grad.dot(&g)?, g.dot(&hg)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(2 * etas.len());
    for &eta in etas {
        let mut first = Vec::new();
        let mut second = Vec::new();
        for (s, (vg, ghg)) in subsets.iter().zip(&terms) {
            let u = game.utility(s, eta)?;
            if u.abs() < MIN_UTILITY {
                continue;
            }
            let u1 = -eta * vg;
            let u2 = eta * eta * ghg;
            first.push(((u - u1) / u).abs());
            second.push(((u - (u1 + 0.5 * u2)) / u).abs());
        }
        for (order, errs) in [(1u8, first), (2u8, second)] {
            rows.push(TaylorRow {
                eta,
                order,
                trimmed_mean_rel_err: trimmed_mean(&errs, trim),
                n_subsets_used: errs.len(),
            });
        }
    }
    Ok(rows)
}

/// `eta,order,trimmed_mean_rel_err,n_subsets_used`; an empty error field
/// marks a step size where no subset was usable.
pub fn save_taylor_csv(path: &Path, rows: &[TaylorRow]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "eta,order,trimmed_mean_rel_err,n_subsets_used")?;
        for r in rows {
            let err = r.trimmed_mean_rel_err.map_or(String::new(), |e| format!("{e:.16e}"));
            writeln!(w, "{:e},{},{err},{}", r.eta, r.order, r.n_subsets_used)?;
        }
        Ok(())
    })
}
