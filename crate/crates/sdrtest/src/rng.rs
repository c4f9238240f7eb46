//! Deterministic random sources.
//!
//! All randomness in the crate flows through ChaCha8 streams addressed by
//! (seed, stream). Distinct streams of one seed are independent, so parallel
//! work can hand stream `i` to task `i` and reproduce a serial run bit for
//! bit. Samplers are built from the raw uniform output (Marsaglia's polar
//! method for normals; sums of squared normals for chi-squareds) rather than
//! platform library routines, so a seed pins the exact sample path.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// The ChaCha stream addressed by (seed, stream).
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Distribution sampler over one deterministic stream.
pub struct Sampler {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Sampler {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Sampler {
            rng: stream(seed, stream_index),
            spare_normal: None,
        }
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via the polar method (pairs are generated together;
    /// the spare is cached).
    pub fn std_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * f);
                return u * f;
            }
        }
    }

    /// Chi-squared with integer degrees of freedom.
    pub fn chi_squared(&mut self, df: u32) -> f64 {
        let mut acc = 0.0;
        for _ in 0..df {
            let z = self.std_normal();
            acc += z * z;
        }
        acc
    }

    /// Student t with integer degrees of freedom.
    pub fn student_t(&mut self, df: u32) -> f64 {
        self.std_normal() / (self.chi_squared(df) / df as f64).sqrt()
    }
}
