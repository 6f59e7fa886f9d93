//! Reproducible sample points.
//!
//! Coordinates come from a Halton sequence (bases 2, 3, 5) with a
//! Cranley–Patterson rotation. The rotation and any discrete draws use
//! `ChaCha8Rng::seed_from_u64(seed)`, so a seed fixes every point on every
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Coordinate range used for boundary and diagonal samples.
pub const SAMPLE_EXTENT: f64 = 10.0;

const BASES: [u64; 3] = [2, 3, 5];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

/// Seeded low-discrepancy stream over `[0, 1)^dims`, `dims <= 3`.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
    shift: [f64; 3],
    index: u64,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = [rng.random(), rng.random(), rng.random()];
        Self { rng, shift, index: 1 }
    }

    /// Next point of the rotated Halton sequence.
    pub fn next_unit(&mut self) -> [f64; 3] {
        let idx = self.index;
        self.index += 1;
        let mut out = [0.0; 3];
        for (d, base) in BASES.iter().enumerate() {
            out[d] = (radical_inverse(idx, *base) + self.shift[d]).fract();
        }
        out
    }

    /// Next coordinate in `(0, SAMPLE_EXTENT]`.
    pub fn next_coordinate(&mut self) -> f64 {
        SAMPLE_EXTENT * (1.0 - self.next_unit()[0])
    }

    /// Next coordinate pair in `(0, SAMPLE_EXTENT]²`.
    pub fn next_pair(&mut self) -> (f64, f64) {
        let u = self.next_unit();
        (SAMPLE_EXTENT * (1.0 - u[0]), SAMPLE_EXTENT * (1.0 - u[1]))
    }

    /// Uniform draw from `1..=n`.
    pub fn edge(&mut self, n: usize) -> usize {
        self.rng.random_range(1..=n)
    }

    pub fn coin(&mut self) -> bool {
        self.rng.random()
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }
}
