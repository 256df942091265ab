//! Counter-based Gaussian draws.
//!
//! Every draw is a pure function of a 256-bit key and a counter: the key
//! seeds a ChaCha8 stream and the counter selects the word position, so no
//! sequential generator state is shared between draws. A standard normal
//! consumes exactly two 64-bit words (Box-Muller, cosine branch).

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domain-separation tags for the key's last word.
pub mod tag {
    pub const WIENER: u64 = 0x5749_454e_4552_0001;
    pub const BRIDGE: u64 = 0x4252_4944_4745_0002;
    pub const INITIAL: u64 = 0x494e_4954_0000_0003;
    pub const SAMPLE: u64 = 0x5341_4d50_4c45_0004;
}

/// A keyed stream with random access by counter.
#[derive(Clone)]
pub struct KeyedStream {
    rng: ChaCha8Rng,
}

impl KeyedStream {
    pub fn new(key: [u64; 4]) -> Self {
        let mut seed = [0u8; 32];
        for (chunk, word) in seed.chunks_exact_mut(8).zip(key) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        KeyedStream { rng: ChaCha8Rng::from_seed(seed) }
    }

    /// Two uniforms, the first in `(0, 1]` and the second in `[0, 1)`.
    pub fn uniform_pair(&mut self, counter: u128) -> (f64, f64) {
        self.rng.set_word_pos(counter * 4);
        let a = self.rng.next_u64() >> 11;
        let b = self.rng.next_u64() >> 11;
        let scale = 1.0 / (1u64 << 53) as f64;
        ((a + 1) as f64 * scale, b as f64 * scale)
    }

    pub fn normal(&mut self, counter: u128) -> f64 {
        let (u1, u2) = self.uniform_pair(counter);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Packs a wavevector into a counter base, 20 bits per component.
pub fn wavevector_code(k: &[i64; 3]) -> u128 {
    const OFF: i64 = 1 << 19;
    k.iter().enumerate().fold(0u128, |acc, (axis, &c)| acc | (((c + OFF) as u128) << (20 * axis)))
}
