//! Seed-stable, splittable random streams.
//!
//! A stream is identified by a `(seed, stream)` pair. The seed is expanded
//! into a ChaCha8 key with SplitMix64 and the stream id is used as the
//! ChaCha nonce, so the output depends only on the pair and the number of
//! words drawn so far. Child streams are derived by hashing the parent id
//! together with a label; they share the key and differ in nonce.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn expand_seed(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN_GAMMA);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    key
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
    words: u64,
    bits: u64,
    bits_left: u32,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::from_seed(expand_seed(seed));
        inner.set_stream(stream);
        RngStream {
            seed,
            stream,
            inner,
            words: 0,
            bits: 0,
            bits_left: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Number of 64-bit words consumed so far.
    pub fn words_drawn(&self) -> u64 {
        self.words
    }

    /// A fresh child stream labelled `label`. The child starts at its own
    /// counter zero and does not depend on how much of `self` was consumed.
    pub fn derive(&self, label: u64) -> RngStream {
        let child = mix64(self.stream ^ mix64(label.wrapping_add(GOLDEN_GAMMA)));
        RngStream::new(self.seed, child)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.words += 1;
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// The next `k <= 32` bits from the bit buffer, least significant first.
    #[inline]
    pub fn next_bits(&mut self, k: u32) -> u64 {
        debug_assert!(k > 0 && k <= 32);
        if self.bits_left < k {
            self.bits = self.next_u64();
            self.bits_left = 64;
        }
        let out = self.bits & ((1u64 << k) - 1);
        self.bits >>= k;
        self.bits_left -= k;
        out
    }

    /// A fair ±1 draw.
    #[inline]
    pub fn next_sign(&mut self) -> i64 {
        (self.next_bits(1) as i64) * 2 - 1
    }
}
