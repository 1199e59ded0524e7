//! FFT power spectrum in cycles/day and the 9 frequency-domain features.
//!
//! With 24 samples per day, frequency bin k of an n-sample sequence sits at
//! k*24/n cycles/day and the one-sided spectrum tops out at the Nyquist rate
//! of 12 cycles/day. Power is normalized as |X_k|^2 / n^2, doubled on the
//! interior bins, so that the Parseval identity reads
//! `sum(power) = mean(x^2)` exactly. No windowing or detrending is applied.
//!
//! Bands: LF [0, 0.75) including DC by default, MF [0.75, 1.25] closed on
//! both ends, HF (1.25, 12]. Both the DC placement and the spectral-entropy
//! normalization are recorded flags so either convention can be reproduced.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-sided power spectrum of an NBDC sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    /// Bin frequencies in cycles/day: `k * 24 / n` for k = 0..=n/2.
    pub frequencies: Vec<f64>,
    /// Power per bin, normalized so the total equals mean(x^2).
    pub power: Vec<f64>,
    /// Original sequence length.
    pub n: usize,
}

/// Band layout plus the two recorded convention flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    /// LF/MF boundary in cycles/day; LF is right-open at it.
    pub mf_lo: f64,
    /// MF/HF boundary in cycles/day; MF is closed at both ends.
    pub mf_hi: f64,
    /// Whether the DC bin belongs to LF (default) or to no band.
    pub dc_in_lf: bool,
    /// Whether spectral entropy is divided by ln(#band bins) into [0,1].
    pub normalize_se: bool,
}

impl Default for BandDefinition {
    fn default() -> Self {
        BandDefinition { mf_lo: 0.75, mf_hi: 1.25, dc_in_lf: true, normalize_se: true }
    }
}

impl BandDefinition {
    pub fn with_edges(mf_lo: f64, mf_hi: f64) -> Result<Self> {
        let def = BandDefinition { mf_lo, mf_hi, ..Default::default() };
        def.validate()?;
        Ok(def)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mf_lo > 0.0 && self.mf_hi > self.mf_lo && self.mf_hi.is_finite()) {
            return Err(Error::invalid_argument(format!(
                "band edges must satisfy 0 < mf_lo < mf_hi; got {}, {}",
                self.mf_lo, self.mf_hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Lf,
    Mf,
    Hf,
}

impl Band {
    pub fn label(&self) -> &'static str {
        match self {
            Band::Lf => "LF",
            Band::Mf => "MF",
            Band::Hf => "HF",
        }
    }
}

/// Which band bin `k` at frequency `f` belongs to; `None` only for the DC
/// bin when `dc_in_lf` is off.
fn band_of(k: usize, f: f64, def: &BandDefinition) -> Option<Band> {
    if k == 0 {
        return def.dc_in_lf.then_some(Band::Lf);
    }
    if f < def.mf_lo {
        Some(Band::Lf)
    } else if f <= def.mf_hi {
        Some(Band::Mf)
    } else {
        Some(Band::Hf)
    }
}

/// One-sided FFT power spectrum. Errors on sequences shorter than 2 samples;
/// pipeline sequences are always >= 240.
pub fn power_spectrum(sequence: &[f64]) -> Result<SpectrumGrid> {
    let n = sequence.len();
    if n < 2 {
        return Err(Error::invalid_argument(format!(
            "power spectrum needs at least 2 samples, got {n}"
        )));
    }
    if !sequence.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid_argument("non-finite value in sequence"));
    }
    let mut buf: Vec<Complex<f64>> = sequence.iter().map(|v| Complex::new(*v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let n2 = (n * n) as f64;
    let mut frequencies = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for (k, x) in buf.iter().take(half + 1).enumerate() {
        let mut p = x.norm_sqr() / n2;
        let interior = k > 0 && !(n % 2 == 0 && k == half);
        if interior {
            p *= 2.0;
        }
        frequencies.push(k as f64 * 24.0 / n as f64);
        power.push(p);
    }
    Ok(SpectrumGrid { frequencies, power, n })
}

/// Band power sums and percentages of total spectrum power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSums {
    pub lf_sum: f64,
    pub mf_sum: f64,
    pub hf_sum: f64,
    pub lf_pct: f64,
    pub mf_pct: f64,
    pub hf_pct: f64,
    /// True when total power is zero; percentages are then defined as 0.
    pub zero_power: bool,
}

/// Sums and percentages over the three bands. The percentage denominator is
/// the total spectrum power including DC regardless of `dc_in_lf`.
pub fn band_features(spectrum: &SpectrumGrid, def: &BandDefinition) -> Result<BandSums> {
    def.validate()?;
    let mut sums = [0.0f64; 3];
    let mut total = 0.0f64;
    for (k, (&f, &p)) in spectrum.frequencies.iter().zip(spectrum.power.iter()).enumerate() {
        total += p;
        if let Some(band) = band_of(k, f, def) {
            sums[band as usize] += p;
        }
    }
    let zero_power = total == 0.0;
    let pct = |s: f64| if zero_power { 0.0 } else { s / total };
    Ok(BandSums {
        lf_sum: sums[0],
        mf_sum: sums[1],
        hf_sum: sums[2],
        lf_pct: pct(sums[0]),
        mf_pct: pct(sums[1]),
        hf_pct: pct(sums[2]),
        zero_power,
    })
}

/// Spectral entropy of one band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandEntropy {
    /// Normalized to [0,1] when `normalize_se` is on.
    pub value: f64,
    /// Bins in the band for this spectrum's resolution.
    pub n_bins: usize,
    /// True when the band carried no power (value defined as 0).
    pub zero_power: bool,
}

/// Shannon entropy of the power distribution within `band`, divided by
/// ln(#bins) when normalization is on. Zero-power or single-bin bands give 0.
pub fn band_spectral_entropy(
    spectrum: &SpectrumGrid,
    def: &BandDefinition,
    band: Band,
) -> Result<BandEntropy> {
    def.validate()?;
    let powers: Vec<f64> = spectrum
        .frequencies
        .iter()
        .zip(spectrum.power.iter())
        .enumerate()
        .filter(|(k, (&f, _))| band_of(*k, f, def) == Some(band))
        .map(|(_, (_, &p))| p)
        .collect();
    let n_bins = powers.len();
    let total: f64 = powers.iter().sum();
    if total == 0.0 {
        return Ok(BandEntropy { value: 0.0, n_bins, zero_power: true });
    }
    let mut h = 0.0;
    for p in &powers {
        let q = p / total;
        if q > 0.0 {
            h -= q * q.ln();
        }
    }
    let value = if def.normalize_se {
        if n_bins < 2 {
            0.0
        } else {
            h / (n_bins as f64).ln()
        }
    } else {
        h
    };
    Ok(BandEntropy { value, n_bins, zero_power: false })
}

/// All 9 frequency-domain features in emission order:
/// `LF_sum, MF_sum, HF_sum, LF_pct, MF_pct, HF_pct, LF_se, MF_se, HF_se`,
/// plus the zero-power flags.
pub fn frequency_features(
    spectrum: &SpectrumGrid,
    def: &BandDefinition,
) -> Result<([f64; 9], BandSums, [BandEntropy; 3])> {
    let sums = band_features(spectrum, def)?;
    let lf = band_spectral_entropy(spectrum, def, Band::Lf)?;
    let mf = band_spectral_entropy(spectrum, def, Band::Mf)?;
    let hf = band_spectral_entropy(spectrum, def, Band::Hf)?;
    let values = [
        sums.lf_sum,
        sums.mf_sum,
        sums.hf_sum,
        sums.lf_pct,
        sums.mf_pct,
        sums.hf_pct,
        lf.value,
        mf.value,
        hf.value,
    ];
    Ok((values, sums, [lf, mf, hf]))
}
