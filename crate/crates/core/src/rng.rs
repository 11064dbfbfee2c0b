//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, stream, counter)`: the ChaCha key is
//! derived from the seed, the ChaCha stream id selects the purpose (init,
//! training batches, evaluation data, ...) and the counter selects a disjoint
//! window of the keystream. No generator state is carried between draws, so a
//! batch is reproducible from the seed and its step alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Keystream words reserved per counter value.
const WINDOW_WORDS: u128 = 1 << 32;

/// Stream ids. Each purpose gets its own keystream so that changing, say, the
/// eval-set size never perturbs the training batches.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const TEACHER: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const CORPUS: u64 = 5;
    pub const PROBE: u64 = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    pub counter: u64,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            seed,
            stream,
            counter: 0,
        }
    }

    /// Generator for the current counter window. Does not advance.
    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(u128::from(self.counter) * WINDOW_WORDS);
        rng
    }

    pub fn advanced(self) -> Self {
        Self {
            counter: self.counter + 1,
            ..self
        }
    }

    /// Hands out the generator for the current window and moves to the next one.
    pub fn draw(&mut self) -> ChaCha8Rng {
        let rng = self.generator();
        self.counter += 1;
        rng
    }
}
