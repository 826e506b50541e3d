//! Keyed random streams for reproducible generation.
//!
//! Algorithm `chacha8-splitmix64-v1`: the 256-bit ChaCha8 key is four
//! consecutive SplitMix64 outputs of the 64-bit seed (little-endian), and
//! each logical stream selects a ChaCha stream id. Derived draws use only
//! `next_u64`, so any ChaCha8 implementation reproduces them:
//!
//! * `below(n)`: high 64 bits of the 128-bit product `next_u64() * n`.
//! * `unit()`: `(next_u64() >> 11) * 2^-53`.
//! * `shuffle`: Fisher-Yates from the last index down, swapping `i` with `below(i + 1)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALGORITHM: &str = "chacha8-splitmix64-v1";

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id of the chain drawn for base index `index`.
pub fn chain_stream(index: u64) -> u64 {
    (1 << 56) | (index & 0xFF_FFFF_FFFF)
}

/// Stream id of the sample at `(hops, context_len, index)`.
pub fn sample_stream(hops: u32, context_len: u32, index: u64) -> u64 {
    (2 << 56) | (u64::from(hops & 0xFF) << 48) | (u64::from(context_len & 0xFF_FFFF) << 24) | (index & 0xFF_FFFF)
}

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream);
        StreamRng { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform index in `0..n`; `n` must be non-zero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
