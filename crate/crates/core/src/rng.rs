//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(seed, stream, index, lane)`, so a path's
//! randomness does not depend on which worker generates it or in what order.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Independent streams used by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    DefaultTime = 1,
    Diffusion = 2,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Keyed generator; holds only the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: splitmix64(seed) }
    }

    #[inline]
    pub fn bits(&self, stream: Stream, index: u64, lane: u64) -> u64 {
        let mut h = splitmix64(self.key ^ stream as u64);
        h = splitmix64(h ^ index);
        splitmix64(h ^ lane.wrapping_mul(GOLDEN_GAMMA))
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, stream: Stream, index: u64, lane: u64) -> f64 {
        ((self.bits(stream, index, lane) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box-Muller from lanes 0 and 1 of `index`.
    #[inline]
    pub fn normal(&self, stream: Stream, index: u64) -> f64 {
        let u1 = self.uniform(stream, index, 0);
        let u2 = self.uniform(stream, index, 1);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
