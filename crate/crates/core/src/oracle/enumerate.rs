use itertools::Itertools;

use crate::error::{Error, Result};
use crate::par;

/// What a utility measures; carried for reporting only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UtilityKind {
    TrueLocal,
    FirstOrder,
    SecondOrder,
    Retraining,
    Synthetic,
}

type SetFn<'a> = Box<dyn Fn(&[usize]) -> f64 + Sync + 'a>;

/// A set function over players `0..players`. Subsets are passed as ascending
/// index lists.
pub struct UtilityFn<'a> {
    pub kind: UtilityKind,
    pub players: usize,
    eval: SetFn<'a>,
}

impl<'a> UtilityFn<'a> {
    pub fn new(kind: UtilityKind, players: usize, eval: impl Fn(&[usize]) -> f64 + Sync + 'a) -> Self {
        UtilityFn { kind, players, eval: Box::new(eval) }
    }

    pub fn eval(&self, subset: &[usize]) -> f64 {
        (self.eval)(subset)
    }

    /// Utility on every subset, indexed by bitmask.
    fn table(&self) -> Result<Vec<f64>> {
        let n = self.players;
        let table = par::map_range(1usize << n, |mask| {
            let subset: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            self.eval(&subset)
        });
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("utility evaluation"));
        }
        Ok(table)
    }
}

pub const MAX_ENUMERATION_PLAYERS: usize = 12;
pub const MAX_PERMUTATION_PLAYERS: usize = 10;

/// Shapley values by summing weighted marginal contributions over all `2ⁿ`
/// subsets.
pub fn exact_shapley(u: &UtilityFn) -> Result<Vec<f64>> {
    let n = u.players;
    if n > MAX_ENUMERATION_PLAYERS {
        return Err(Error::TooManyPlayers { what: "exact_shapley", n, max: MAX_ENUMERATION_PLAYERS });
    }
    let table = u.table()?;
    // weight[s] = s!(n−s−1)!/n!
    let weight: Vec<f64> = (0..n)
        .map(|s| {
            let mut w = 1.0 / n as f64;
            for k in 1..=s {
                w *= k as f64 / (n - k) as f64;
            }
            w
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            let bit = 1usize << i;
            let mut acc = 0.0;
            for mask in 0..table.len() {
                if mask & bit == 0 {
                    acc += weight[mask.count_ones() as usize] * (table[mask | bit] - table[mask]);
                }
            }
            acc
        })
        .collect())
}

/// Shapley values as the average marginal contribution over all `n!`
/// arrival orders.
pub fn permutation_shapley(u: &UtilityFn) -> Result<Vec<f64>> {
    let n = u.players;
    if n > MAX_PERMUTATION_PLAYERS {
        return Err(Error::TooManyPlayers { what: "permutation_shapley", n, max: MAX_PERMUTATION_PLAYERS });
    }
    let table = u.table()?;
    let mut phi = vec![0.0; n];
    let mut count = 0u64;
    for perm in (0..n).permutations(n) {
        let mut mask = 0usize;
        for &i in &perm {
            phi[i] += table[mask | 1 << i] - table[mask];
            mask |= 1 << i;
        }
        count += 1;
    }
    let count = count.max(1) as f64;
    Ok(phi.into_iter().map(|v| v / count).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use proptest::prelude::*;

    fn additive(c: &[f64]) -> UtilityFn<'_> {
        UtilityFn::new(UtilityKind::Synthetic, c.len(), move |s| s.iter().map(|&i| c[i]).sum())
    }

    #[test]
    fn additive_utility_returns_weights() {
        let c = [1.5, -2.0, 0.25, 4.0];
        let phi = exact_shapley(&additive(&c)).unwrap();
        for (p, w) in phi.iter().zip(&c) {
            assert!((p - w).abs() < 1e-12);
        }
    }

    #[test]
    fn squared_size_splits_evenly() {
        let u = UtilityFn::new(UtilityKind::Synthetic, 3, |s| (s.len() * s.len()) as f64);
        for p in exact_shapley(&u).unwrap() {
            assert!((p - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_player_gets_its_marginal() {
        let u = UtilityFn::new(UtilityKind::Synthetic, 1, |s| if s.is_empty() { 0.5 } else { 2.0 });
        assert_eq!(exact_shapley(&u).unwrap(), vec![1.5]);
    }

    #[test]
    fn too_many_players() {
        let u = UtilityFn::new(UtilityKind::Synthetic, 13, |_| 0.0);
        assert!(matches!(exact_shapley(&u), Err(Error::TooManyPlayers { n: 13, .. })));
        let u = UtilityFn::new(UtilityKind::Synthetic, 11, |_| 0.0);
        assert!(permutation_shapley(&u).is_err());
    }

    #[test]
    fn non_finite_utility_is_an_error() {
        let u = UtilityFn::new(UtilityKind::Synthetic, 2, |s| if s.len() == 2 { f64::NAN } else { 0.0 });
        assert!(exact_shapley(&u).is_err());
    }

    /// Concave-of-modular utility: submodular for non-negative weights.
    fn submodular(w: &[f64]) -> UtilityFn<'_> {
        UtilityFn::new(UtilityKind::Synthetic, w.len(), move |s| s.iter().map(|&i| w[i]).sum::<f64>().sqrt())
    }

    #[test]
    fn submodular_matches_permutation_definition() {
        let mut rng = SeededRng::new(6);
        for _ in 0..5 {
            let w: Vec<f64> = (0..6).map(|_| rng.next_f64() * 3.0).collect();
            let u = submodular(&w);
            let a = exact_shapley(&u).unwrap();
            let b = permutation_shapley(&u).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
            }
        }
    }

    fn table_utility(values: &[f64], n: usize) -> UtilityFn<'_> {
        UtilityFn::new(UtilityKind::Synthetic, n, move |s| {
            let mask: usize = s.iter().map(|i| 1 << i).sum();
            if mask == 0 {
                0.0
            } else {
                values[mask]
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn efficiency(values in prop::collection::vec(-5.0f64..5.0, 32)) {
            let u = table_utility(&values, 5);
            let total: f64 = exact_shapley(&u).unwrap().iter().sum();
            prop_assert!((total - values[31]).abs() <= 1e-12 * (1.0 + values[31].abs()) + 1e-12);
        }

        #[test]
        fn linearity(a in prop::collection::vec(-5.0f64..5.0, 16), b in prop::collection::vec(-5.0f64..5.0, 16)) {
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let pa = exact_shapley(&table_utility(&a, 4)).unwrap();
            let pb = exact_shapley(&table_utility(&b, 4)).unwrap();
            let ps = exact_shapley(&table_utility(&sum, 4)).unwrap();
            for i in 0..4 {
                prop_assert!((ps[i] - pa[i] - pb[i]).abs() <= 1e-12);
            }
        }

        #[test]
        fn null_player_gets_zero(values in prop::collection::vec(-5.0f64..5.0, 16)) {
            // Player 4 never changes the utility.
            let u = UtilityFn::new(UtilityKind::Synthetic, 5, |s| {
                let mask: usize = s.iter().filter(|&&i| i < 4).map(|i| 1 << i).sum();
                if mask == 0 { 0.0 } else { values[mask] }
            });
            prop_assert_eq!(exact_shapley(&u).unwrap()[4], 0.0);
        }

        #[test]
        fn symmetric_players_tie(w in prop::collection::vec(0.0f64..3.0, 4)) {
            let mut w = w;
            w.push(w[1]);
            let phi = exact_shapley(&submodular(&w)).unwrap();
            prop_assert!((phi[1] - phi[4]).abs() <= 1e-12);
        }
    }
}
