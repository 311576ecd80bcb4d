use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::model::Example;
use crate::shapley::{Order, ValueLedger};

/// Cumulative value of one domain after one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionRow {
    pub iteration: usize,
    pub domain: String,
    pub cumulative: f64,
    /// Share of the positive value held by this domain; 0 for domains whose
    /// cumulative value is negative.
    pub share: f64,
}

/// Per-domain cumulative value over iterations, from a ledger kept with an
/// iteration log. Untagged examples are grouped under an empty name.
pub fn domain_composition(ledger: &ValueLedger, dataset: &[Example]) -> Result<Vec<CompositionRow>> {
    let log = ledger.log().ok_or_else(|| Error::invalid("composition needs a ledger with an iteration log"))?;
    if ledger.n_examples() != dataset.len() {
        return Err(Error::dims("domain_composition", "ledger does not cover the dataset"));
    }
    let mut cumulative: BTreeMap<&str, f64> =
        dataset.iter().map(|e| (e.domain.as_deref().unwrap_or(""), 0.0)).collect();
    let mut rows = Vec::with_capacity(log.len() * cumulative.len());
    for entry in log {
        let contributions = match ledger.order() {
            Order::First => &entry.first,
            Order::Second => entry.second.as_ref().expect("second-order log"),
        };
        for (&i, phi) in entry.batch.iter().zip(contributions) {
            *cumulative.get_mut(dataset[i].domain.as_deref().unwrap_or("")).expect("domain seen") -= phi;
        }
        let positive: f64 = cumulative.values().filter(|v| **v > 0.0).sum();
        for (d, &v) in &cumulative {
            let share = if v > 0.0 && positive > 0.0 { v / positive } else { 0.0 };
            rows.push(CompositionRow { iteration: entry.iteration, domain: d.to_string(), cumulative: v, share });
        }
    }
    Ok(rows)
}

/// Final value per domain, summed over the ledger's examples.
pub fn domain_totals(ledger: &ValueLedger, dataset: &[Example]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (i, e) in dataset.iter().enumerate() {
        *out.entry(e.domain.clone().unwrap_or_default()).or_insert(0.0) += ledger.value(i);
    }
    out
}

pub fn save_composition(path: &Path, rows: &[CompositionRow]) -> Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iteration", "domain", "cumulative_value", "share"])?;
        for r in rows {
            out.write_record([
                r.iteration.to_string(),
                r.domain.clone(),
                format!("{:.16e}", r.cumulative),
                format!("{:.16e}", r.share),
            ])?;
        }
        out.flush()
    })
}
