//! Row layout shared by every prediction model.
//!
//! Predictor order is fixed: last observed score, age, gender contrast,
//! education, then the selected feature block. The baseline model is the
//! same design with the feature block switched off, not a separate code
//! path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FEATURE_NAMES, N_FEATURES, N_STAT};

/// Which slice of the 49 features enters the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    /// Demographics and last score only.
    None,
    /// The 16 second-order statistical features.
    Statistical,
    /// All 49 features.
    All,
}

impl FeatureSubset {
    pub fn n_features(&self) -> usize {
        match self {
            FeatureSubset::None => 0,
            FeatureSubset::Statistical => N_STAT,
            FeatureSubset::All => N_FEATURES,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FeatureSubset::None => "none",
            FeatureSubset::Statistical => "statistical",
            FeatureSubset::All => "all",
        }
    }
}

/// One modelling row: a target score with everything known before it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub participant_id: String,
    pub target: f64,
    /// Most recent score available at prediction time.
    pub last_score: f64,
    pub age: f64,
    pub female: f64,
    pub education: f64,
    /// Full 49-vector; the subset selector picks the block used.
    pub features: Vec<f64>,
}

/// A set of rows plus the feature subset in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDesign {
    pub rows: Vec<PredictionRow>,
    pub subset: FeatureSubset,
}

/// Non-feature predictors, always present and always first.
pub const BASE_PREDICTORS: [&str; 4] = ["last_score", "age", "female", "education"];

impl PredictionDesign {
    pub fn new(rows: Vec<PredictionRow>, subset: FeatureSubset) -> Result<Self> {
        let need = subset.n_features();
        for r in &rows {
            if r.features.len() < need {
                return Err(Error::invalid_argument(format!(
                    "row for {} has {} features, subset {} needs {need}",
                    r.participant_id,
                    r.features.len(),
                    subset.label()
                )));
            }
            let finite = r.target.is_finite()
                && r.last_score.is_finite()
                && r.age.is_finite()
                && r.female.is_finite()
                && r.education.is_finite()
                && r.features[..need].iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::invalid_argument(format!(
                    "non-finite predictor or target for {}",
                    r.participant_id
                )));
            }
        }
        Ok(PredictionDesign { rows, subset })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Predictor count for this subset.
    pub fn n_predictors(&self) -> usize {
        BASE_PREDICTORS.len() + self.subset.n_features()
    }

    pub fn predictor_names(&self) -> Vec<String> {
        let mut names: Vec<String> = BASE_PREDICTORS.iter().map(|s| s.to_string()).collect();
        names.extend(FEATURE_NAMES.iter().take(self.subset.n_features()).cloned());
        names
    }

    /// Raw (unstandardized) predictor row.
    pub fn predictor_row(&self, i: usize) -> Vec<f64> {
        let r = &self.rows[i];
        let mut out = Vec::with_capacity(self.n_predictors());
        out.extend([r.last_score, r.age, r.female, r.education]);
        out.extend(&r.features[..self.subset.n_features()]);
        out
    }

    /// Raw n x p predictor matrix.
    pub fn predictor_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.rows.len()).map(|i| self.predictor_row(i)).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    /// Distinct participants in order of first appearance.
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

/// Per-column centering/scaling frozen from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    /// Fits means and sample SDs column-wise; constant columns get SD 1 so
    /// they standardize to exactly zero.
    pub fn fit(matrix: &[Vec<f64>]) -> Result<Standardizer> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::invalid_argument("cannot standardize an empty matrix"));
        }
        let p = matrix[0].len();
        let mut means = vec![0.0f64; p];
        for row in matrix {
            if row.len() != p {
                return Err(Error::invalid_argument("ragged predictor matrix"));
            }
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= n as f64;
        }
        let mut sds = vec![0.0f64; p];
        if n > 1 {
            for row in matrix {
                for ((s, v), m) in sds.iter_mut().zip(row).zip(&means) {
                    let d = v - m;
                    *s += d * d;
                }
            }
            for s in sds.iter_mut() {
                *s = (*s / (n - 1) as f64).sqrt();
            }
        }
        for s in sds.iter_mut() {
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Ok(Standardizer { means, sds })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, matrix: &[Vec<f64>]) -> Vec<Vec<f64>> {
        matrix.iter().map(|r| self.transform_row(r)).collect()
    }
}
