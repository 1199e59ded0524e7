//! The 49-feature vector of Table 1 and batch extraction over intervals.
//!
//! Canonical column order: the 16 second-order statistics
//! (`{Max,Min,Mean,Std}_{Max,Min,Mean,Std}`), then `MSE_1..MSE_24`, then the
//! 9 frequency-domain features
//! (`LF_sum, MF_sum, HF_sum, LF_pct, MF_pct, HF_pct, LF_se, MF_se, HF_se`).

pub mod entropy;
pub mod frequency;
pub mod statistical;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use once_cell::sync::Lazy;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::NbdcInterval;
use entropy::{mse_profile, MseParams};
use frequency::{frequency_features, power_spectrum, BandDefinition};
use statistical::{second_order_features, STAT_FEATURE_NAMES};

pub const N_STAT: usize = 16;
pub const N_MSE: usize = 24;
pub const N_FREQ: usize = 9;
pub const N_FEATURES: usize = N_STAT + N_MSE + N_FREQ;

/// The 49 feature names in canonical column order.
pub static FEATURE_NAMES: Lazy<Vec<String>> = Lazy::new(|| {
    let mut names: Vec<String> = STAT_FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    names.extend((1..=N_MSE).map(|t| format!("MSE_{t}")));
    names.extend(
        ["LF_sum", "MF_sum", "HF_sum", "LF_pct", "MF_pct", "HF_pct", "LF_se", "MF_se", "HF_se"]
            .iter()
            .map(|s| s.to_string()),
    );
    debug_assert_eq!(names.len(), N_FEATURES);
    names
});

static NAME_INDEX: Lazy<BTreeMap<&'static str, usize>> = Lazy::new(|| {
    FEATURE_NAMES.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
});

/// Index of a feature name in canonical order.
pub fn feature_index(name: &str) -> Option<usize> {
    NAME_INDEX.get(name).copied()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCategory {
    Statistical,
    Entropy,
    Frequency,
}

impl FeatureCategory {
    pub fn label(&self) -> &'static str {
        match self {
            FeatureCategory::Statistical => "statistical",
            FeatureCategory::Entropy => "entropy",
            FeatureCategory::Frequency => "frequency",
        }
    }
}

/// Category of the feature at a canonical index.
pub fn feature_category(index: usize) -> FeatureCategory {
    match index {
        i if i < N_STAT => FeatureCategory::Statistical,
        i if i < N_STAT + N_MSE => FeatureCategory::Entropy,
        _ => FeatureCategory::Frequency,
    }
}

/// Everything configurable about extraction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub mse: MseParams,
    pub bands: BandDefinition,
}

/// One interval's 49 features plus its identifying metadata and any
/// degeneracy flags raised during extraction (capped entropies, zero-power
/// bands).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub participant_id: String,
    pub date: NaiveDate,
    pub phq8: u8,
    /// Canonical order, length [`N_FEATURES`].
    pub values: Vec<f64>,
    pub flags: Vec<String>,
}

/// Extracts all 49 features of one interval.
pub fn extract_features(interval: &NbdcInterval, config: &FeatureConfig) -> Result<FeatureVector> {
    interval.check_invariants()?;
    let mut values = Vec::with_capacity(N_FEATURES);
    let mut flags = Vec::new();

    values.extend(second_order_features(interval));

    let mse = mse_profile(&interval.sequence, &config.mse)?;
    for (t, (v, capped)) in mse.values.iter().zip(mse.capped.iter()).enumerate() {
        values.push(*v);
        if *capped {
            flags.push(format!("MSE_{}:capped", t + 1));
        }
    }

    let spectrum = power_spectrum(&interval.sequence)?;
    let (freq, sums, entropies) = frequency_features(&spectrum, &config.bands)?;
    values.extend(freq);
    if sums.zero_power {
        flags.push("bands:zero_power".into());
    }
    for (band, e) in ["LF", "MF", "HF"].iter().zip(entropies.iter()) {
        if e.zero_power && !sums.zero_power {
            flags.push(format!("{band}_se:zero_power"));
        }
    }

    debug_assert_eq!(values.len(), N_FEATURES);
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::numerical(
            "extract_features",
            format!(
                "feature {} is not finite for participant {} interval {}",
                FEATURE_NAMES[bad], interval.participant_id, interval.phq8.date
            ),
        ));
    }
    Ok(FeatureVector {
        participant_id: interval.participant_id.clone(),
        date: interval.phq8.date,
        phq8: interval.phq8.score,
        values,
        flags,
    })
}

/// Extracts features for every interval, in parallel, preserving input order.
pub fn extract_all(intervals: &[NbdcInterval], config: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    intervals.par_iter().map(|iv| extract_features(iv, config)).collect()
}

/// In-memory image of `features.csv`: one row per interval.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn new(rows: Vec<FeatureVector>) -> Self {
        FeatureTable { rows }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// One feature column across rows.
    pub fn column(&self, index: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[index]).collect()
    }

    /// PHQ-8 scores as reals, aligned with rows.
    pub fn scores(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.phq8 as f64).collect()
    }

    /// Distinct participants in row order of first appearance.
    pub fn participants(&self) -> Vec<String> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.rows {
            if seen.insert(r.participant_id.clone()) {
                out.push(r.participant_id.clone());
            }
        }
        out
    }
}
