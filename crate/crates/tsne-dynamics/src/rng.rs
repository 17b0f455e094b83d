//! Seeded, portable pseudo-random numbers.
//!
//! Everything random in this crate flows through [`SplitMix64`], a 64-bit
//! counter-based generator (Steele, Lea, Flood 2014). Its output is a pure
//! function of the seed on every platform, which is what makes trajectories
//! and serialized artifacts byte-stable. Independent streams are derived
//! with [`SplitMix64::split`]: stream `s` of seed `x` starts from the
//! avalanche mix of `x + (s+1) * GOLDEN`, so distinct stream ids never
//! collide with each other or with the parent sequence.

/// Weyl increment: the 64-bit golden ratio.
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 generator. The identifier string recorded in run metadata is
/// [`SplitMix64::NAME`].
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    cached_normal: Option<f64>,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    /// Generator identifier, stored in output metadata.
    pub const NAME: &'static str = "splitmix64/box-muller";

    pub fn new(seed: u64) -> Self {
        SplitMix64 {
            state: seed,
            cached_normal: None,
        }
    }

    /// Derive an independent stream from this generator's seed.
    pub fn split(seed: u64, stream: u64) -> Self {
        SplitMix64::new(mix(
            seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN)),
        ))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `(0, 1]`, safe to feed into `ln`.
    fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller; the paired draw is cached.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// `count` i.i.d. standard normals.
    pub fn normals(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.next_normal()).collect()
    }

    /// Index draw from a probability vector by inverse CDF.
    pub fn next_category(&mut self, probs: &[f64]) -> usize {
        let u = self.next_f64();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }
}
