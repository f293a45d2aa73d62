//! Seeded uniform noise with record/replay.
//!
//! Every stochastic layer draws through a `NoiseSource`. Recording the draws
//! and replaying them makes runs reproducible and keeps finite-difference
//! gradient checks valid through sampling layers: each re-evaluation of the
//! loss sees the exact same randomness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Derives an independent stream seed from a base seed.
pub fn subseed(seed: u64, stream: u64) -> u64 {
    // splitmix64 on the xored pair; cheap and well-dispersed.
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

enum Mode {
    Stream(ChaCha8Rng),
    Replay { draws: Vec<f64>, pos: usize },
}

/// Uniform `(0, 1)` draws, recorded as they are consumed.
pub struct NoiseSource {
    mode: Mode,
    record: Vec<f64>,
}

impl NoiseSource {
    pub fn from_seed(seed: u64) -> Self {
        NoiseSource {
            mode: Mode::Stream(ChaCha8Rng::seed_from_u64(seed)),
            record: Vec::new(),
        }
    }

    /// Replays a previously recorded sequence of draws.
    pub fn replay(draws: Vec<f64>) -> Self {
        NoiseSource {
            mode: Mode::Replay { draws, pos: 0 },
            record: Vec::new(),
        }
    }

    /// Next uniform draw in the open interval (0, 1).
    ///
    /// Panics when a replay source is exhausted: that means the forward pass
    /// consumed more randomness than the recorded one, which is a structural
    /// bug, not a runtime condition.
    pub fn uniform(&mut self) -> f64 {
        let x = match &mut self.mode {
            Mode::Stream(rng) => {
                let raw: f64 = rng.random();
                raw.max(f64::MIN_POSITIVE)
            }
            Mode::Replay { draws, pos } => {
                assert!(
                    *pos < draws.len(),
                    "frozen noise exhausted after {} draws",
                    draws.len()
                );
                let x = draws[*pos];
                *pos += 1;
                x
            }
        };
        self.record.push(x);
        x
    }

    /// All draws consumed so far, in order.
    pub fn recording(&self) -> &[f64] {
        &self.record
    }
}
