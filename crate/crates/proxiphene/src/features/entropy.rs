//! Multiscale sample entropy (MSE_1..MSE_24).
//!
//! The sequence is coarse-grained by non-overlapping block means at scales 1
//! to 24 and sample entropy is computed at each scale with the tolerance `r`
//! fixed from the scale-1 sequence. Sample entropy follows the
//! Richman-Moorman counting convention: both template lengths use the first
//! `N - m` starting positions, pairs are unordered and self-matches excluded,
//! and matching uses Chebyshev distance `<= r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::statistical::sample_std;

/// Multiscale-entropy parameters. Defaults: `m = 2`, `r_factor = 0.15`,
/// `max_scale = 24`, the Costa et al. conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseParams {
    /// Embedding dimension (template length), at least 1.
    pub m: usize,
    /// Tolerance multiplier: `r = r_factor * sd(scale-1 sequence)`.
    pub r_factor: f64,
    /// Highest scale, inclusive.
    pub max_scale: usize,
}

impl Default for MseParams {
    fn default() -> Self {
        MseParams { m: 2, r_factor: 0.15, max_scale: 24 }
    }
}

impl MseParams {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::invalid_argument("mse m must be >= 1"));
        }
        if !(self.r_factor > 0.0) || !self.r_factor.is_finite() {
            return Err(Error::invalid_argument("mse r_factor must be a positive real"));
        }
        if self.max_scale < 1 {
            return Err(Error::invalid_argument("mse max_scale must be >= 1"));
        }
        Ok(())
    }
}

/// Non-overlapping block means of length `scale`; the trailing remainder is
/// dropped, so the output has `floor(N / scale)` entries.
pub fn coarse_grain(sequence: &[f64], scale: usize) -> Result<Vec<f64>> {
    if scale < 1 {
        return Err(Error::invalid_argument("scale must be >= 1"));
    }
    if sequence.len() < scale {
        return Err(Error::invalid_argument(format!(
            "scale {scale} exceeds sequence length {}",
            sequence.len()
        )));
    }
    Ok(sequence
        .chunks_exact(scale)
        .map(|block| block.iter().sum::<f64>() / scale as f64)
        .collect())
}

/// Sample entropy of one sequence, with the match counts that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleEntropy {
    /// `-ln(A/B)`, or the cap below when either count is zero.
    pub value: f64,
    /// B: matching template pairs of length m.
    pub matches_m: u64,
    /// A: matching template pairs of length m+1.
    pub matches_m1: u64,
    /// True when A=0 or B=0 and the capped value was substituted.
    pub capped: bool,
}

/// The conservative stand-in for undefined entropy on a length-`n` sequence:
/// `-ln(2 / ((n-m)(n-m-1)))`, i.e. minus the log of the least nonzero
/// probability among the `(n-m)(n-m-1)/2` template pairs.
pub fn entropy_cap(n: usize, m: usize) -> f64 {
    let t = (n - m) as f64;
    -(2.0 / (t * (t - 1.0))).ln()
}

/// Sample entropy with Chebyshev matching.
///
/// Both template lengths draw from starting positions `0..n-m`, giving
/// `(n-m)(n-m-1)/2` candidate pairs. Requires `n > m + 1` and `r > 0`.
pub fn sample_entropy(sequence: &[f64], m: usize, r: f64) -> Result<SampleEntropy> {
    let n = sequence.len();
    if m < 1 {
        return Err(Error::invalid_argument("m must be >= 1"));
    }
    if n <= m + 1 {
        return Err(Error::invalid_argument(format!(
            "sequence length {n} too short for m={m}; need at least {}",
            m + 2
        )));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid_argument("tolerance r must be a positive real"));
    }
    let n_templates = n - m;
    let mut matches_m: u64 = 0;
    let mut matches_m1: u64 = 0;
    for i in 0..n_templates {
        for j in (i + 1)..n_templates {
            let mut within = true;
            for k in 0..m {
                if (sequence[i + k] - sequence[j + k]).abs() > r {
                    within = false;
                    break;
                }
            }
            if within {
                matches_m += 1;
                if (sequence[i + m] - sequence[j + m]).abs() <= r {
                    matches_m1 += 1;
                }
            }
        }
    }
    if matches_m == 0 || matches_m1 == 0 {
        return Ok(SampleEntropy {
            value: entropy_cap(n, m),
            matches_m,
            matches_m1,
            capped: true,
        });
    }
    let value = -((matches_m1 as f64) / (matches_m as f64)).ln();
    Ok(SampleEntropy { value, matches_m, matches_m1, capped: false })
}

/// The entropy profile over scales `1..=max_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct MseProfile {
    /// `values[t-1]` is MSE at scale t.
    pub values: Vec<f64>,
    /// Which scales hit the undefined-entropy cap.
    pub capped: Vec<bool>,
    /// The tolerance used at every scale.
    pub r: f64,
}

/// Computes MSE_1..MSE_max_scale with `r` fixed from the scale-1 sequence.
/// A zero standard deviation (constant sequence) substitutes `r = 1e-9`.
pub fn mse_profile(sequence: &[f64], params: &MseParams) -> Result<MseProfile> {
    params.validate()?;
    let shortest = sequence.len() / params.max_scale;
    if shortest <= params.m + 1 {
        return Err(Error::invalid_argument(format!(
            "sequence length {} leaves {shortest} points at scale {}; need more than {}",
            sequence.len(),
            params.max_scale,
            params.m + 1
        )));
    }
    let mut r = params.r_factor * sample_std(sequence);
    if r == 0.0 {
        r = 1e-9;
    }
    let mut values = Vec::with_capacity(params.max_scale);
    let mut capped = Vec::with_capacity(params.max_scale);
    for scale in 1..=params.max_scale {
        let grained = coarse_grain(sequence, scale)?;
        let se = sample_entropy(&grained, params.m, r)?;
        values.push(se.value);
        capped.push(se.capped);
    }
    Ok(MseProfile { values, capped, r })
}
