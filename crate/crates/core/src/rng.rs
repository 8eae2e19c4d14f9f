//! Seeded, stream-indexed random number generation.
//!
//! The generator is ChaCha8 (`rand_chacha`). A generator is identified by a
//! `(seed, stream)` pair: the 256-bit key is expanded from `seed` with
//! `SeedableRng::seed_from_u64` (PCG32 expansion) and `stream` selects the
//! ChaCha stream. Uniform doubles take the top 53 bits of a `u64` and scale by
//! 2⁻⁵³. Normals use the basic Box–Muller transform: each pair of uniforms
//! `(u1, u2)` yields `r cos θ` and then `r sin θ` (cached) with
//! `r = sqrt(-2 ln(1 - u1))` and `θ = 2π u2`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::matrix::DenseMatrix;

/// Streams reserved for the pipeline stages.
pub mod streams {
    pub const SYNTH: u64 = 1;
    pub const OPERATOR: u64 = 2;
    pub const FIT: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const POWER_ITERATION: u64 = 5;
}

#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
    spare_normal: Option<f64>,
}

impl Rng {
    /// Generator on stream 0.
    pub fn new(seed: u64) -> Self {
        Self::from_stream(seed, 0)
    }

    pub fn from_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng {
            inner,
            seed,
            stream,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent generator for sub-stream `index` of this generator's seed.
    /// Stream indices are mixed so that children of different parents do not
    /// collide with the parent streams.
    pub fn child(&self, index: u64) -> Rng {
        Rng::from_stream(self.seed, derive_seed(self.stream, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `0..n` by rejection, so there is no modulo bias.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % n;
            }
        }
    }

    /// Fisher–Yates shuffle, last position first.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// `count` distinct indices from `0..n`, sorted ascending.
    pub fn sample_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        assert!(count <= n, "cannot sample {count} of {n}");
        let mut all: Vec<usize> = (0..n).collect();
        // partial Fisher–Yates from the front
        for i in 0..count {
            let j = i + self.below((n - i) as u64) as usize;
            all.swap(i, j);
        }
        all.truncate(count);
        all.sort_unstable();
        all
    }

    /// Uniformly random direction in `dim` dimensions.
    pub fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.standard_normal()).collect();
            let norm = crate::matrix::dot(&v, &v).sqrt();
            if norm > 1e-10 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }
}

/// SplitMix64 mix of a seed and a stream index into a new 64-bit value.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Matrix of i.i.d. standard normals, filled in column-major order.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.standard_normal()).collect();
    DenseMatrix::from_col_major(rows, cols, data).expect("length matches by construction")
}
