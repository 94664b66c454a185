//! Self-contained deterministic random numbers.
//!
//! Every stochastic step in this crate (synthetic data, splits, epoch
//! shuffles, weight init, SMO index selection) goes through [`Rng64`], a
//! xoshiro256** generator seeded via SplitMix64. Both algorithms are fixed
//! here with their published constants, so a seed produces the same stream
//! on every platform; the platform default generator is never used.

/// SplitMix64 step. Used to expand a single `u64` seed into generator state
/// and as a finalizer for [`stable_hash64`].
#[inline]
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// xoshiro256** 1.0 (Blackman & Vigna), seeded with SplitMix64.
#[derive(Debug, Clone)]
pub struct Rng64 {
    s: [u64; 4],
}

impl Rng64 {
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng64 { s }
    }

    /// Derive an independent stream for a named sub-task. Mixing the label
    /// hash into the seed keeps e.g. per-window training streams decoupled.
    pub fn derive(seed: u64, label: &str) -> Self {
        Self::from_seed(seed ^ stable_hash64(0x5EED, label))
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1]
            .wrapping_mul(5)
            .rotate_left(7)
            .wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(-limit, limit)`.
    pub fn uniform_symmetric(&mut self, limit: f64) -> f64 {
        (2.0 * self.next_f64() - 1.0) * limit
    }

    /// Uniform integer in `[0, n)` via widening multiply (Lemire).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Approximately standard-normal deviate: sum of 12 uniforms minus 6
    /// (Irwin-Hall). Mean 0, variance exactly 1, and built from IEEE basic
    /// ops only, so the stream is bit-identical across platforms (libm-free).
    pub fn approx_normal(&mut self) -> f64 {
        let mut acc = 0.0;
        for _ in 0..12 {
            acc += self.next_f64();
        }
        acc - 6.0
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.below(i + 1);
            slice.swap(i, j);
        }
    }
}

/// Deterministic non-cryptographic hash: FNV-1a over bytes, SplitMix64
/// finalizer. Used for model fingerprints and stream derivation.
pub fn stable_hash64(seed: u64, data: impl AsRef<[u8]>) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in data.as_ref() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    let mut state = seed ^ h;
    splitmix64(&mut state)
}

/// Hash a slice of `f64` by bit pattern (no rounding, NaN-safe).
pub fn hash_f64_slice(seed: u64, values: &[f64]) -> u64 {
    let mut h = seed ^ values.len() as u64;
    for v in values {
        let mut state = h ^ v.to_bits();
        h = splitmix64(&mut state);
    }
    h
}
