//! Reference distributions for the test statistics: chi-squared tails and
//! weighted mixtures of independent chi-squareds.
//!
//! The general-variant tests refer a statistic to Σ ω_i χ²(b_i) with weights
//! estimated from the sample. Tail probabilities for that mixture come from
//! Satterthwaite's two-moment approximation by default — fit s·χ²(ν) to the
//! mixture's mean and variance and read the scaled tail — with a seeded Monte
//! Carlo evaluation available as the audit oracle.

use rayon::prelude::*;

use crate::config::{WEIGHT_CLAMP, WEIGHT_DROP};
use crate::error::{Error, Result};
use crate::rng::Sampler;
use crate::special::reg_gamma_upper;

/// Survival function of the chi-squared distribution with `df` degrees of
/// freedom (df may be non-integer, as Satterthwaite produces).
pub fn chisq_survival(df: f64, t: f64) -> f64 {
    assert!(df > 0.0, "chisq_survival needs df > 0, got {df}");
    assert!(t >= 0.0, "chisq_survival needs t >= 0, got {t}");
    if t == 0.0 {
        return 1.0;
    }
    reg_gamma_upper(df / 2.0, t / 2.0)
}

/// Weighted mixture Σ ω_i χ²(b_i) of independent chi-squared variables.
///
/// Construction clamps estimation noise: weights in [−1e-8, 0) become 0 and
/// weights below 1e-12 of the largest are dropped; a weight more negative
/// than −1e-8 is a genuine upstream failure and is reported as an error.
#[derive(Debug, Clone)]
pub struct ChiSqMixture {
    terms: Vec<(f64, u32)>,
}

impl ChiSqMixture {
    pub fn new(weights: &[f64], df: u32) -> Result<Self> {
        assert!(df >= 1, "mixture terms need df >= 1");
        let mut max_w = 0.0f64;
        for &w in weights {
            if w < -WEIGHT_CLAMP {
                return Err(Error::NegativeWeight { weight: w });
            }
            max_w = max_w.max(w);
        }
        let terms = weights
            .iter()
            .filter(|&&w| w > WEIGHT_DROP * max_w && w > 0.0)
            .map(|&w| (w, df))
            .collect();
        Ok(ChiSqMixture { terms })
    }

    /// Mixture with per-term degrees of freedom (used by tests and oracles;
    /// the estimators in this crate always produce a common df).
    pub fn from_terms(terms: Vec<(f64, u32)>) -> Result<Self> {
        let weights: Vec<f64> = terms.iter().map(|&(w, _)| w).collect();
        let mut max_w = 0.0f64;
        for &w in &weights {
            if w < -WEIGHT_CLAMP {
                return Err(Error::NegativeWeight { weight: w });
            }
            max_w = max_w.max(w);
        }
        Ok(ChiSqMixture {
            terms: terms
                .into_iter()
                .filter(|&(w, _)| w > WEIGHT_DROP * max_w && w > 0.0)
                .collect(),
        })
    }

    pub fn terms(&self) -> &[(f64, u32)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Mean Σ ω_i b_i and variance 2 Σ ω_i² b_i.
    pub fn moments(&self) -> (f64, f64) {
        let mean: f64 = self.terms.iter().map(|&(w, b)| w * b as f64).sum();
        let var: f64 = 2.0 * self.terms.iter().map(|&(w, b)| w * w * b as f64).sum::<f64>();
        (mean, var)
    }

    /// Satterthwaite tail probability: match mean and variance with s·χ²(ν),
    /// then p = Survival_{χ²(ν)}(t / s).
    pub fn satterthwaite_pvalue(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let m1: f64 = self.terms.iter().map(|&(w, b)| w * b as f64).sum();
        let m2: f64 = self.terms.iter().map(|&(w, b)| w * w * b as f64).sum();
        if m1 <= 0.0 || m2 <= 0.0 {
            // Degenerate mixture is a point mass at 0; any positive statistic
            // sits beyond the whole distribution.
            return 0.0;
        }
        let scale = m2 / m1;
        let nu = m1 * m1 / m2;
        chisq_survival(nu, t / scale)
    }

    /// Monte Carlo tail probability with its binomial standard error.
    ///
    /// Draws are split into fixed-size blocks; block k uses stream (seed, k),
    /// so the estimate is independent of evaluation order and thread count.
    pub fn mc_pvalue(&self, t: f64, draws: usize, seed: u64) -> (f64, f64) {
        assert!(draws >= 1000, "mc_pvalue needs at least 1000 draws");
        if t <= 0.0 {
            return (1.0, 0.0);
        }
        if self.terms.is_empty() {
            return (0.0, 0.0);
        }
        const BLOCK: usize = 1 << 16;
        let blocks = draws.div_ceil(BLOCK);
        let exceed: u64 = (0..blocks)
            .into_par_iter()
            .map(|k| {
                let lo = k * BLOCK;
                let hi = ((k + 1) * BLOCK).min(draws);
                let mut sampler = Sampler::new(seed, k as u64);
                let mut count = 0u64;
                for _ in lo..hi {
                    let mut total = 0.0;
                    for &(w, b) in &self.terms {
                        total += w * sampler.chi_squared(b);
                    }
                    if total > t {
                        count += 1;
                    }
                }
                count
            })
            .sum();
        let p = exceed as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        (p, se)
    }
}
