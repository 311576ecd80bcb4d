use crate::error::{Error, Result};
use crate::shapley::IterationRecord;

/// Which closed form a ledger accumulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

/// Per-iteration contributions for one validation target.
#[derive(Clone, Debug, PartialEq)]
pub struct StepValues {
    pub first: Vec<f64>,
    pub second: Option<Vec<f64>>,
}

/// One iteration's contributions, summed over validation targets.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub batch: Vec<usize>,
    pub first: Vec<f64>,
    pub second: Option<Vec<f64>>,
}

/// Run-level Shapley contributions.
///
/// Stored sums are contributions to the validation-loss *change* (negative
/// means the example lowered the loss). The `value*` accessors flip the sign
/// so that a positive value is a helpful example; by linearity this is the
/// Shapley value of the loss-reduction utility.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueLedger {
    order: Order,
    n_examples: usize,
    targets: Vec<usize>,
    first: Vec<Vec<f64>>,
    second: Option<Vec<Vec<f64>>>,
    times_sampled: Vec<u64>,
    log: Option<Vec<IterationLog>>,
}

impl ValueLedger {
    /// Empty ledger over `n_examples` training examples and the given
    /// validation target ids.
    pub fn new(order: Order, n_examples: usize, targets: Vec<usize>, keep_log: bool) -> Self {
        let zeros = || vec![vec![0.0; n_examples]; targets.len()];
        ValueLedger {
            order,
            n_examples,
            first: zeros(),
            second: (order == Order::Second).then(zeros),
            targets,
            times_sampled: vec![0; n_examples],
            log: keep_log.then(Vec::new),
        }
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn n_examples(&self) -> usize {
        self.n_examples
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn times_sampled(&self, idx: usize) -> u64 {
        self.times_sampled[idx]
    }

    pub fn log(&self) -> Option<&[IterationLog]> {
        self.log.as_deref()
    }

    /// Add one iteration's contributions, `per_target[k]` for target `k`,
    /// each indexed like `record.batch`.
    pub fn accumulate(&mut self, record: &IterationRecord, per_target: &[StepValues]) -> Result<()> {
        if per_target.len() != self.targets.len() {
            return Err(Error::dims(
                "accumulate",
                format!("{} targets, ledger has {}", per_target.len(), self.targets.len()),
            ));
        }
        let b = record.batch.len();
        for sv in per_target {
            let second_ok = match (&self.second, &sv.second) {
                (Some(_), Some(s)) => s.len() == b,
                (None, _) => true,
                (Some(_), None) => false,
            };
            if sv.first.len() != b || !second_ok {
                return Err(Error::dims("accumulate", "contribution vectors must match the batch"));
            }
        }
        if let Some(&bad) = record.batch.iter().find(|&&i| i >= self.n_examples) {
            return Err(Error::UnknownSample { index: bad, available: self.n_examples });
        }

        for (k, sv) in per_target.iter().enumerate() {
            for (pos, &i) in record.batch.iter().enumerate() {
                self.first[k][i] += sv.first[pos];
            }
            if let (Some(second), Some(vals)) = (&mut self.second, &sv.second) {
                for (pos, &i) in record.batch.iter().enumerate() {
                    second[k][i] += vals[pos];
                }
            }
        }
        for &i in &record.batch {
            self.times_sampled[i] += 1;
        }
        if let Some(log) = &mut self.log {
            let combine = |pick: &dyn Fn(&StepValues) -> Option<&Vec<f64>>| -> Option<Vec<f64>> {
                let mut acc = vec![0.0; b];
                for sv in per_target {
                    acc.iter_mut().zip(pick(sv)?).for_each(|(a, v)| *a += v);
                }
                Some(acc)
            };
            let first = combine(&|sv| Some(&sv.first)).expect("first order is always present");
            let second = if self.second.is_some() { combine(&|sv| sv.second.as_ref()) } else { None };
            log.push(IterationLog { iteration: record.iteration, batch: record.batch.clone(), first, second });
        }
        Ok(())
    }

    /// Accumulated first-order loss-change contribution toward target `k`.
    pub fn first_sum(&self, k: usize, idx: usize) -> f64 {
        self.first[k][idx]
    }

    pub fn second_sum(&self, k: usize, idx: usize) -> Option<f64> {
        self.second.as_ref().map(|s| s[k][idx])
    }

    /// First-order value toward the whole validation set: the negated sum
    /// over targets, in target order.
    pub fn value_first(&self, idx: usize) -> f64 {
        -self.first.iter().map(|t| t[idx]).sum::<f64>()
    }

    pub fn value_second(&self, idx: usize) -> Option<f64> {
        self.second.as_ref().map(|s| -s.iter().map(|t| t[idx]).sum::<f64>())
    }

    /// The value at the ledger's own order.
    pub fn value(&self, idx: usize) -> f64 {
        match self.order {
            Order::First => self.value_first(idx),
            Order::Second => self.value_second(idx).expect("second-order ledger"),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n_examples).map(|i| self.value(i)).collect()
    }

    /// Total predicted validation-loss reduction: the sum of all values.
    pub fn total_value(&self) -> f64 {
        (0..self.n_examples).map(|i| self.value(i)).sum()
    }

    /// Ranks (1 = highest value) of example `idx` under each order.
    pub fn rank_of(&self, idx: usize, order: Order) -> Option<usize> {
        let v = |i| match order {
            Order::First => Some(self.value_first(i)),
            Order::Second => self.value_second(i),
        };
        let mine = v(idx)?;
        Some(1 + (0..self.n_examples).filter(|&i| v(i).is_some_and(|x| x > mine)).count())
    }
}
