use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::model::{Example, Target};
use crate::shapley::ValueLedger;

fn csv_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Csv { path: path.to_path_buf(), line, message: message.into() }
}

/// Reads `feature_0..feature_{d-1},label[,domain]`. Labels that all parse as
/// non-negative integers become class targets, otherwise regression targets.
/// Example ids are row indices.
pub fn load_csv(path: &Path) -> Result<Vec<Example>> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| csv_error(path, 1, e.to_string()))?;
    let headers = reader.headers().map_err(|e| csv_error(path, 1, e.to_string()))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyDataset);
    }
    let has_domain = headers.iter().next_back() == Some("domain");
    let n_features = headers.len() - 1 - usize::from(has_domain);
    for (j, h) in headers.iter().take(n_features).enumerate() {
        if h != format!("feature_{j}") {
            return Err(csv_error(path, 1, format!("expected column feature_{j}, found `{h}`")));
        }
    }
    if headers.get(n_features) != Some("label") || n_features == 0 {
        return Err(csv_error(path, 1, "header must be feature_0..feature_{d-1},label[,domain]"));
    }

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(path, e.position().map_or(line, |p| p.line() as usize), e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(csv_error(path, line, format!("expected {} fields, found {}", headers.len(), rec.len())));
        }
        let features = (0..n_features)
            .map(|j| {
                let v: f64 =
                    rec[j].trim().parse().map_err(|_| csv_error(path, line, format!("bad number `{}`", &rec[j])))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(csv_error(path, line, "non-finite feature"))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = rec[n_features].trim().to_string();
        let domain = has_domain.then(|| rec[n_features + 1].to_string());
        rows.push((line, features, label, domain));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = rows.iter().all(|r| r.2.parse::<usize>().is_ok());
    rows.into_iter()
        .enumerate()
        .map(|(id, (line, features, label, domain))| {
            let target = if classes {
                Target::class(label.parse().expect("checked above"))
            } else {
                let v: f64 = label.parse().map_err(|_| csv_error(path, line, format!("bad label `{label}`")))?;
                if !v.is_finite() {
                    return Err(csv_error(path, line, "non-finite label"));
                }
                Target::value(v)
            };
            let ex = Example::new(id, features, target);
            Ok(match domain {
                Some(d) => ex.with_domain(d),
                None => ex,
            })
        })
        .collect()
}

fn label_field(ex: &Example) -> Result<String> {
    match &ex.target {
        Target::Class(c) if c.len() == 1 => Ok(c[0].to_string()),
        Target::Regression(v) if v.len() == 1 => Ok(format!("{:.16e}", v[0])),
        _ => Err(Error::invalid(format!("example {}: only scalar labels can be written to CSV", ex.id))),
    }
}

/// Writes examples in the format [`load_csv`] reads, with 17 significant
/// digits so values round-trip exactly.
pub fn save_dataset(path: &Path, examples: &[Example]) -> Result<()> {
    let first = examples.first().ok_or(Error::EmptyDataset)?;
    let d = first.features.len();
    let has_domain = examples.iter().any(|e| e.domain.is_some());
    if examples.iter().any(|e| e.features.len() != d) {
        return Err(Error::invalid("examples have different feature lengths"));
    }
    let labels = examples.iter().map(label_field).collect::<Result<Vec<_>>>()?;
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..d).map(|j| format!("feature_{j}")).collect();
        header.push("label".into());
        if has_domain {
            header.push("domain".into());
        }
        out.write_record(&header)?;
        for (ex, label) in examples.iter().zip(labels) {
            let mut row: Vec<String> = ex.features.iter().map(|v| format!("{v:.16e}")).collect();
            row.push(label);
            if has_domain {
                row.push(ex.domain.clone().unwrap_or_default());
            }
            out.write_record(&row)?;
        }
        out.flush()
    })
}

/// One row per training example:
/// `example_id,times_sampled,value_first,value_second[,domain]`.
/// `value_second` is empty for a first-order ledger.
pub fn save_scores(path: &Path, ledger: &ValueLedger, dataset: &[Example]) -> Result<()> {
    if ledger.n_examples() != dataset.len() {
        return Err(Error::dims("save_scores", "ledger does not cover the dataset"));
    }
    let has_domain = dataset.iter().any(|e| e.domain.is_some());
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["example_id", "times_sampled", "value_first", "value_second"];
        if has_domain {
            header.push("domain");
        }
        out.write_record(&header)?;
        for (i, ex) in dataset.iter().enumerate() {
            let mut row = vec![
                ex.id.to_string(),
                ledger.times_sampled(i).to_string(),
                format!("{:.16e}", ledger.value_first(i)),
                ledger.value_second(i).map_or(String::new(), |v| format!("{v:.16e}")),
            ];
            if has_domain {
                row.push(ex.domain.clone().unwrap_or_default());
            }
            out.write_record(&row)?;
        }
        out.flush()
    })
}
