use std::collections::BTreeSet;

use rand_core::{impls, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based SplitMix64 generator.
///
/// The 64-bit state is a Weyl counter advanced by the golden-ratio gamma; each
/// output is the SplitMix64 finalizer applied to the counter. The stream is a
/// pure function of the seed, identical on every platform.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeededRng {
    state: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { state: seed }
    }

    /// Independent stream `stream` derived from `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        SeededRng { state: mix64(seed ^ mix64(stream.wrapping_add(GOLDEN_GAMMA))) }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn from_state(state: u64) -> Self {
        SeededRng { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` by rejection sampling. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = (u64::MAX / n) * n;
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        (SeededRng::next_u64(self) >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        SeededRng::next_u64(self)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}

/// Uniform sample of `batch_size` distinct indices from `0..n`, sorted ascending.
///
/// Uses Floyd's algorithm, consuming exactly `batch_size` draws.
pub fn sample_batch(rng: &mut SeededRng, n: usize, batch_size: usize) -> Result<Vec<usize>> {
    if batch_size > n {
        return Err(Error::invalid(format!("batch size {batch_size} exceeds dataset size {n}")));
    }
    let mut chosen = BTreeSet::new();
    for j in (n - batch_size)..n {
        let t = rng.below(j as u64 + 1) as usize;
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    Ok(chosen.into_iter().collect())
}
