//! Seeded random streams.
//!
//! Every stochastic component draws from xoshiro256** seeded through
//! splitmix64 (`Xoshiro256StarStar::seed_from_u64`). Integer draws use the
//! widening-multiply reduction `(next_u64 * n) >> 64` so that the exact draw
//! sequence is easy to reproduce outside Rust.

use rand::{RngCore, SeedableRng};
pub use rand_xoshiro::Xoshiro256StarStar as Rng64;

pub fn seeded(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

/// Stream for a numbered sub-task (worker, map, repetition) of a seeded run.
pub fn derived(seed: u64, stream: u64) -> Rng64 {
    Rng64::seed_from_u64(splitmix64(seed ^ splitmix64(stream.wrapping_add(0x5EED))))
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform integer in `0..n`. `n` must be non-zero.
pub fn below(rng: &mut impl RngCore, n: u64) -> u64 {
    debug_assert!(n > 0);
    ((rng.next_u64() as u128 * n as u128) >> 64) as u64
}

/// Uniform float in `[0, 1)` from the top 53 bits.
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Partial Fisher-Yates: the first `k` entries of the returned vector are a
/// uniform draw without replacement from `items`, in draw order.
pub fn sample_without_replacement<T: Copy>(rng: &mut impl RngCore, items: &[T], k: usize) -> Vec<T> {
    let mut pool = items.to_vec();
    let k = k.min(pool.len());
    for t in 0..k {
        let pick = t + below(rng, (pool.len() - t) as u64) as usize;
        pool.swap(t, pick);
    }
    pool.truncate(k);
    pool
}

/// Standard normal via Box-Muller.
pub fn normal(rng: &mut impl RngCore) -> f64 {
    let u1 = 1.0 - unit_f64(rng);
    let u2 = unit_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// 64-bit FNV-1a, the content hash used for map and config identifiers.
#[derive(Debug, Clone, Copy)]
pub struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv64 {
    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn write_u32(&mut self, v: u32) {
        self.write(&v.to_le_bytes());
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write(&v.to_bits().to_le_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}
