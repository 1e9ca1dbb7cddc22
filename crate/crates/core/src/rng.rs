//! Seeded random streams for simulations.
//!
//! Every run owns one [`SimRng`]. The underlying generator is ChaCha20
//! (RFC 8439 block function, 64-bit counter) seeded through
//! `rand_core::SeedableRng::seed_from_u64`, which expands the `u64` seed
//! with PCG32 into the 32-byte key. Derived draws are fixed here so that
//! ports in other languages can reproduce streams exactly:
//!
//! * `uniform()`: `(next_u64() >> 11) * 2^-53`, a double in `[0, 1)`.
//! * `normal()`: Box–Muller on two uniforms, `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`.
//!   The sine branch is discarded so each normal costs exactly two `u64`s.
//! * `categorical(p)`: one uniform `u`, first index whose cumulative mass exceeds `u`.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha20Rng,
}

impl SimRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Sample an index from a probability vector. Mass that rounding leaves
    /// past the last cumulative sum goes to the last positive entry.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (k, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = k;
            }
            acc += p;
            if u < acc {
                return k;
            }
        }
        last_positive
    }
}
