//! Portable seeded pseudo-random source.
//!
//! Every random draw in this crate goes through [`SplitMix64`] so fixtures can be
//! regenerated bit-for-bit by any implementation that follows the same recipe:
//!
//! * state update: `state += 0x9E3779B97F4A7C15` (wrapping), then the output mix
//!   `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//!   z ^ (z >> 31)`.
//! * uniform real in `[0, 1)`: `(next_u64() >> 11) * 2^-53`.
//! * uniform integer in `[0, n)`: draw `x` until `x < u64::MAX - (u64::MAX % n)`, return `x % n`.
//! * standard normal: Box-Muller on `u1 = 1 - uniform()`, `u2 = uniform()`, returning
//!   `sqrt(-2 ln u1) cos(2 pi u2)` and caching `sqrt(-2 ln u1) sin(2 pi u2)` for the next call.
//! * sampling `m` of `n` without replacement: partial Fisher-Yates over `0..n`,
//!   `for i in 0..m { swap(i, i + below(n - i)) }`, keeping the first `m` slots.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    spare_normal: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0) is undefined");
        let bound = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < bound {
                return x % n;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Draws `m` distinct indices from `0..n` in draw order (partial Fisher-Yates).
    /// When `m >= n` every index is returned, still shuffled.
    pub fn sample_indices(&mut self, n: usize, m: usize) -> Vec<usize> {
        let mut slots: Vec<usize> = (0..n).collect();
        let take = m.min(n);
        for i in 0..take {
            let j = i + self.below((n - i) as u64) as usize;
            slots.swap(i, j);
        }
        slots.truncate(take);
        slots
    }
}
