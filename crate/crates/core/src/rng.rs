//! Small deterministic PRNG for workload generation.
//!
//! SplitMix64 is used both as a sequential generator and as a stateless hash
//! of (seed, lane) tuples so that workload streams are a pure function of
//! their inputs regardless of generation order.

/// SplitMix64 step on a raw state value.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash several words into one uniform 64-bit value.
pub fn hash_words(words: &[u64]) -> u64 {
    let mut acc = 0x51_7c_c1_b7_27_22_0a_95u64;
    for &w in words {
        acc = splitmix64(acc ^ w);
    }
    acc
}

/// Sequential SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        splitmix64(self.state.wrapping_sub(0x9e37_79b9_7f4a_7c15))
    }

    /// Uniform value in `[0, bound)`. `bound` must be nonzero.
    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }
}
