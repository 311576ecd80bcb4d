use super::*;
use crate::model::{Activation, Example, LossKind, ModelSpec, Target};
use crate::shapley::Order;
use crate::trainer::{train_with_attribution, Attribution, TrainConfig};
use crate::Error;
use std::fs;

fn spec(kind: GeneratorKind) -> SyntheticTaskSpec {
    SyntheticTaskSpec { kind, n_val: 10, ..SyntheticTaskSpec::gaussian_mixture(100, 4, 3, 0.0, 7) }
}

#[test]
fn clean_task_has_no_flips() {
    let task = generate(&spec(GeneratorKind::GaussianMixture)).unwrap();
    assert!(task.flipped.iter().all(|f| !f));
    assert_eq!(task.train.len(), 100);
    assert_eq!(task.val.len(), 10);
}

#[test]
fn noise_flips_exactly_the_requested_count() {
    let task = generate(&SyntheticTaskSpec { noise: 0.2, ..spec(GeneratorKind::GaussianMixture) }).unwrap();
    assert_eq!(task.flipped.iter().filter(|f| **f).count(), 20);
    for (i, ex) in task.train.iter().enumerate() {
        let label = match &ex.target {
            Target::Class(c) => c[0],
            _ => unreachable!(),
        };
        assert_eq!(label != task.true_labels[i], task.flipped[i]);
    }
}

#[test]
fn generation_is_deterministic() {
    let s = SyntheticTaskSpec { noise: 0.1, ..spec(GeneratorKind::DomainMixture) };
    assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
    let other = SyntheticTaskSpec { seed: 8, ..s.clone() };
    assert_ne!(generate(&s).unwrap().train, generate(&other).unwrap().train);
}

#[test]
fn stratified_domains() {
    assert_eq!(stratified_counts(1000, &[0.5, 0.5]), vec![500, 500]);
    assert_eq!(stratified_counts(10, &[0.25, 0.25, 0.5]), vec![3, 2, 5]);
    let s = SyntheticTaskSpec { n: 1000, proportions: vec![0.5, 0.5], ..spec(GeneratorKind::DomainMixture) };
    let task = generate(&s).unwrap();
    let d0 = task.train.iter().filter(|e| e.domain.as_deref() == Some("domain_0")).count();
    assert_eq!(d0, 500);
}

#[test]
fn probe_copies_its_source() {
    let s = SyntheticTaskSpec { probe_source: 17, ..spec(GeneratorKind::NearDuplicateProbe) };
    let task = generate(&s).unwrap();
    let (probe, src) = (&task.val[0], &task.train[17]);
    assert_eq!(probe.target, src.target);
    let same_bits = probe.features.iter().zip(&src.features).all(|(a, b)| a.to_bits() == b.to_bits());
    assert!(same_bits);

    let moved = generate(&SyntheticTaskSpec { probe_delta: 0.5, ..s }).unwrap();
    let dist: f64 = moved.val[0].features.iter().zip(&src.features).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!((dist - 0.5).abs() < 1e-12);
}

#[test]
fn degenerate_specs_rejected() {
    assert!(matches!(
        generate(&SyntheticTaskSpec { n: 0, ..spec(GeneratorKind::GaussianMixture) }),
        Err(Error::EmptyDataset)
    ));
    assert!(generate(&SyntheticTaskSpec { noise: 0.5, ..spec(GeneratorKind::GaussianMixture) }).is_err());
    assert!(generate(&SyntheticTaskSpec { proportions: vec![0.3, 0.3], ..spec(GeneratorKind::DomainMixture) }).is_err());
    assert!(generate(&SyntheticTaskSpec { classes: 5, ..spec(GeneratorKind::GaussianMixture) }).is_err());
    assert!(generate(&SyntheticTaskSpec { probe_source: 100, ..spec(GeneratorKind::NearDuplicateProbe) }).is_err());
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let task =
        generate(&SyntheticTaskSpec { proportions: vec![0.3, 0.7], ..spec(GeneratorKind::DomainMixture) }).unwrap();
    save_dataset(&path, &task.train).unwrap();
    assert_eq!(load_csv(&path).unwrap(), task.train);
}

#[test]
fn hand_written_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.csv");
    fs::write(&path, "feature_0,feature_1,label\n1.5,-2,0\n0.1,1e-3,2\n-0,3.25,1\n").unwrap();
    let data = load_csv(&path).unwrap();
    assert_eq!(data.len(), 3);
    assert_eq!(data[0].features, vec![1.5, -2.0]);
    assert_eq!(data[1].features, vec![0.1, 0.001]);
    assert_eq!(data[2].target, Target::class(1));
    assert_eq!(data[2].id, 2);

    fs::write(&path, "feature_0,label,domain\n0.5,1.25,web\n").unwrap();
    let data = load_csv(&path).unwrap();
    assert_eq!(data[0].target, Target::value(1.25));
    assert_eq!(data[0].domain.as_deref(), Some("web"));
}

#[test]
fn csv_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "").unwrap();
    assert!(matches!(load_csv(&path), Err(Error::EmptyDataset)));
    fs::write(&path, "feature_0,label\n").unwrap();
    assert!(matches!(load_csv(&path), Err(Error::EmptyDataset)));
    fs::write(&path, "feature_0,label\n1,0\nx,1\n").unwrap();
    assert!(matches!(load_csv(&path), Err(Error::Csv { line: 3, .. })));
    fs::write(&path, "feature_0,label\n1,0\n2,1\n3\n").unwrap();
    assert!(matches!(load_csv(&path), Err(Error::Csv { line: 4, .. })));
    fs::write(&path, "x,label\n1,0\n").unwrap();
    assert!(matches!(load_csv(&path), Err(Error::Csv { line: 1, .. })));
}

fn domain_run(order: Attribution) -> (Vec<Example>, crate::shapley::ValueLedger) {
    let s = SyntheticTaskSpec { n: 60, proportions: vec![0.5, 0.25, 0.25], ..spec(GeneratorKind::DomainMixture) };
    let task = generate(&s).unwrap();
    let model = ModelSpec::new(vec![4, 5, 3], Activation::Tanh, LossKind::SoftmaxCrossEntropy).unwrap();
    let config = TrainConfig {
        iterations: 15,
        batch_size: 8,
        attribution: order,
        log_iterations: true,
        ..TrainConfig::new(model)
    };
    let run = train_with_attribution(&config, &task.train, &task.val[..2]).unwrap();
    (task.train, run.ledger.unwrap())
}

#[test]
fn composition_sums_to_ledger_total() {
    for order in [Attribution::First, Attribution::Second] {
        let (train, ledger) = domain_run(order);
        let rows = domain_composition(&ledger, &train).unwrap();
        let last_iter = rows.last().unwrap().iteration;
        let final_sum: f64 = rows.iter().filter(|r| r.iteration == last_iter).map(|r| r.cumulative).sum();
        let total = ledger.total_value();
        assert!((final_sum - total).abs() <= 1e-12 * (1.0 + total.abs()));
        let totals = domain_totals(&ledger, &train);
        for r in rows.iter().filter(|r| r.iteration == last_iter) {
            assert!((totals[&r.domain] - r.cumulative).abs() <= 1e-12 * (1.0 + r.cumulative.abs()));
        }
        let shares: f64 = rows.iter().filter(|r| r.iteration == last_iter).map(|r| r.share).sum();
        assert!(shares == 0.0 || (shares - 1.0).abs() < 1e-12);
    }
}

#[test]
fn score_csv_layout() {
    let (train, ledger) = domain_run(Attribution::Second);
    assert_eq!(ledger.order(), Order::Second);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.csv");
    save_scores(&path, &ledger, &train).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("example_id,times_sampled,value_first,value_second,domain"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0");
    assert_eq!(row[2].parse::<f64>().unwrap(), ledger.value_first(0));
    assert_eq!(row[3].parse::<f64>().unwrap(), ledger.value_second(0).unwrap());
    assert_eq!(text.lines().count(), train.len() + 1);

    let comp = dir.path().join("composition.csv");
    save_composition(&comp, &domain_composition(&ledger, &train).unwrap()).unwrap();
    assert!(fs::read_to_string(&comp).unwrap().starts_with("iteration,domain,cumulative_value,share\n"));
}
