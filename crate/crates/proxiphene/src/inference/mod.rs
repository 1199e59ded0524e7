//! Statistical battery: per-feature mixed-model associations with BH
//! correction, nested model comparison by likelihood ratio, and the
//! feature-feature Spearman matrix.

pub mod bh;
pub mod lmm;
pub mod lrt;
pub mod spearman;

pub use bh::bh_adjust;
pub use lmm::{fit_lmm, LmmFit, LmmOptions};
pub use lrt::{chi2_critical, chi2_sf, likelihood_ratio_test, LrtResult};
pub use spearman::{average_ranks, spearman, spearman_matrix, SpearmanMatrix};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::domain::{Demographics, Gender};
use crate::error::{Error, Result};
use crate::features::{feature_category, FeatureTable, FEATURE_NAMES};

/// Numeric contrast for the gender covariate.
pub fn gender_code(gender: Gender) -> f64 {
    match gender {
        Gender::Female => 1.0,
        Gender::Male => 0.0,
        Gender::Other => 0.5,
    }
}

/// One feature's association test against the outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssociationResult {
    pub feature: String,
    pub category: String,
    /// Per-unit fixed-effect estimate for the feature (unstandardized).
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedFeature {
    pub feature: String,
    pub reason: String,
}

/// Full association scan output; results keep canonical feature order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssociationScan {
    pub results: Vec<AssociationResult>,
    pub skipped: Vec<SkippedFeature>,
    pub n_obs: usize,
    pub n_participants: usize,
}

/// Two-sided p-value from the standard normal.
fn normal_two_sided_p(z: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).unwrap();
    (2.0 * std.sf(z.abs())).min(1.0)
}

struct JoinedCovariates {
    group_of: Vec<usize>,
    n_groups: usize,
    age: Vec<f64>,
    female: Vec<f64>,
    education: Vec<f64>,
}

/// Joins per-row demographics by participant and assigns dense group codes.
fn join_covariates(table: &FeatureTable, demographics: &[Demographics]) -> Result<JoinedCovariates> {
    let by_id: BTreeMap<&str, &Demographics> =
        demographics.iter().map(|d| (d.participant_id.as_str(), d)).collect();
    let mut codes: BTreeMap<&str, usize> = BTreeMap::new();
    let mut group_of = Vec::with_capacity(table.len());
    let mut age = Vec::with_capacity(table.len());
    let mut female = Vec::with_capacity(table.len());
    let mut education = Vec::with_capacity(table.len());
    for row in &table.rows {
        let pid = row.participant_id.as_str();
        let demo = by_id.get(pid).ok_or_else(|| {
            Error::invalid_data("demographics", None, format!("participant {pid} has feature rows but no demographics"))
        })?;
        let next = codes.len();
        group_of.push(*codes.entry(pid).or_insert(next));
        age.push(demo.age_years);
        female.push(gender_code(demo.gender));
        education.push(demo.education_years);
    }
    let n_groups = codes.len();
    Ok(JoinedCovariates { group_of, n_groups, age, female, education })
}

/// Regresses the outcome on each feature in turn, with age, gender, and
/// education as fixed covariates and a participant random intercept.
///
/// Constant feature columns (and any column whose fit fails) are skipped
/// with a reason rather than aborting the scan. The BH adjustment runs
/// across the tests actually performed.
pub fn pairwise_associations(
    table: &FeatureTable,
    demographics: &[Demographics],
) -> Result<AssociationScan> {
    if table.is_empty() {
        return Err(Error::invalid_argument("association scan needs at least one feature row"));
    }
    let cov = join_covariates(table, demographics)?;
    if cov.n_groups < 2 {
        return Err(Error::invalid_argument("association scan needs at least 2 participants"));
    }
    let y = table.scores();
    let n = y.len();
    let n_features = table.rows[0].values.len();

    enum Outcome {
        Fit { feature: String, category: String, estimate: f64, se: f64, z: f64, p_value: f64 },
        Skip(SkippedFeature),
    }

    let outcomes: Vec<Outcome> = (0..n_features)
        .into_par_iter()
        .map(|k| {
            let name = FEATURE_NAMES[k].clone();
            let col = table.column(k);
            if col.iter().all(|v| *v == col[0]) {
                return Outcome::Skip(SkippedFeature {
                    feature: name,
                    reason: format!("constant column (value {})", col[0]),
                });
            }
            let x = DMatrix::from_fn(n, 5, |i, j| match j {
                0 => 1.0,
                1 => col[i],
                2 => cov.age[i],
                3 => cov.female[i],
                _ => cov.education[i],
            });
            let names: Vec<String> = ["intercept", name.as_str(), "age", "female", "education"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            match fit_lmm(&y, &x, &cov.group_of, &names, &LmmOptions::default()) {
                Ok(fit) => {
                    let (estimate, se) = fit.coefficient(&name).unwrap();
                    let z = estimate / se;
                    Outcome::Fit {
                        feature: name,
                        category: feature_category(k).label().to_string(),
                        estimate,
                        se,
                        z,
                        p_value: normal_two_sided_p(z),
                    }
                }
                Err(e) => Outcome::Skip(SkippedFeature { feature: name, reason: e.to_string() }),
            }
        })
        .collect();

    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Fit { feature, category, estimate, se, z, p_value } => {
                results.push(AssociationResult {
                    feature,
                    category,
                    estimate,
                    se,
                    z,
                    p_value,
                    p_adjusted: f64::NAN,
                });
            }
            Outcome::Skip(s) => skipped.push(s),
        }
    }
    let raw: Vec<f64> = results.iter().map(|r| r.p_value).collect();
    let adjusted = bh_adjust(&raw)?;
    for (r, q) in results.iter_mut().zip(adjusted) {
        r.p_adjusted = q;
    }
    Ok(AssociationScan { results, skipped, n_obs: n, n_participants: cov.n_groups })
}

/// One row of the nested comparison: the model itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NestedModelSummary {
    /// "A", "B", or "C".
    pub name: String,
    pub description: String,
    /// Declared fixed-effect count (before any alias drops).
    pub n_fixed_effects: usize,
    pub log_likelihood: f64,
    pub n_params: usize,
    /// Design columns dropped as linearly dependent, by name.
    pub dropped: Vec<String>,
    pub tau2: f64,
    pub sigma2: f64,
}

/// Nested comparison of the three fixed-effect specifications.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelComparison {
    pub models: Vec<NestedModelSummary>,
    pub tests: Vec<LrtResult>,
    pub n_obs: usize,
    pub n_participants: usize,
}

fn summarize(name: &str, description: &str, fit: &LmmFit) -> NestedModelSummary {
    NestedModelSummary {
        name: name.to_string(),
        description: description.to_string(),
        n_fixed_effects: fit.names.len(),
        log_likelihood: fit.log_likelihood,
        n_params: fit.n_params,
        dropped: fit.dropped.iter().map(|&k| fit.names[k].clone()).collect(),
        tau2: fit.tau2,
        sigma2: fit.sigma2,
    }
}

/// Fits Models A (demographics), B (A + 16 statistical features), and
/// C (A + all 49 features), then tests B vs A, C vs B, and C vs A.
///
/// All three fits drop aliased columns instead of erroring: the three band
/// percentages sum to one, so Model C's declared design is always singular
/// against the intercept. Degrees of freedom use declared counts, keeping
/// the familiar 16/33/49 differences.
pub fn nested_model_comparison(
    table: &FeatureTable,
    demographics: &[Demographics],
) -> Result<ModelComparison> {
    if table.is_empty() {
        return Err(Error::invalid_argument("model comparison needs feature rows"));
    }
    let cov = join_covariates(table, demographics)?;
    if cov.n_groups < 2 {
        return Err(Error::invalid_argument("model comparison needs at least 2 participants"));
    }
    let y = table.scores();
    let n = y.len();
    let n_features = table.rows[0].values.len();
    let n_stat = crate::features::N_STAT.min(n_features);

    let demo_cols = 4usize;
    let build = |feature_count: usize| -> (DMatrix<f64>, Vec<String>) {
        let p = demo_cols + feature_count;
        let x = DMatrix::from_fn(n, p, |i, j| match j {
            0 => 1.0,
            1 => cov.age[i],
            2 => cov.female[i],
            3 => cov.education[i],
            _ => table.rows[i].values[j - demo_cols],
        });
        let mut names: Vec<String> =
            ["intercept", "age", "female", "education"].iter().map(|s| s.to_string()).collect();
        names.extend(FEATURE_NAMES.iter().take(feature_count).cloned());
        (x, names)
    };

    let opts = LmmOptions { drop_aliased: true };
    let specs = [
        ("A", "demographics", 0),
        ("B", "demographics + statistical features", n_stat),
        ("C", "demographics + all features", n_features),
    ];
    let fits: Vec<LmmFit> = specs
        .par_iter()
        .map(|(_, _, count)| {
            let (x, names) = build(*count);
            fit_lmm(&y, &x, &cov.group_of, &names, &opts)
        })
        .collect::<Result<_>>()?;

    let models = specs
        .iter()
        .zip(fits.iter())
        .map(|((name, desc, _), fit)| summarize(name, desc, fit))
        .collect();
    let tests = vec![
        likelihood_ratio_test("A", &fits[0], "B", &fits[1])?,
        likelihood_ratio_test("B", &fits[1], "C", &fits[2])?,
        likelihood_ratio_test("A", &fits[0], "C", &fits[2])?,
    ];
    Ok(ModelComparison { models, tests, n_obs: n, n_participants: cov.n_groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureVector, N_FEATURES};
    use approx::assert_relative_eq;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal as NormalDist};

    fn demo(pid: &str, age: f64, gender: Gender, edu: f64) -> Demographics {
        Demographics { participant_id: pid.to_string(), age_years: age, gender, education_years: edu }
    }

    /// Synthetic feature table where the outcome is linear in feature 10
    /// (Mean_Mean) plus a participant offset and noise.
    fn planted_table(seed: u64, slope: f64) -> (FeatureTable, Vec<Demographics>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = NormalDist::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut demos = Vec::new();
        for p in 0..24 {
            let pid = format!("P{p:02}");
            let offset = rng.random_range(-2.0..2.0);
            demos.push(demo(&pid, rng.random_range(20.0..60.0), if p % 2 == 0 { Gender::Female } else { Gender::Male }, rng.random_range(8.0..20.0)));
            for t in 0..6u64 {
                let mut values = vec![0.0f64; N_FEATURES];
                for v in values.iter_mut() {
                    *v = rng.random_range(0.0..4.0);
                }
                let score = (10.0 + slope * values[10] + offset + noise.sample(&mut rng))
                    .round()
                    .clamp(0.0, 24.0);
                rows.push(FeatureVector {
                    participant_id: pid.clone(),
                    date: NaiveDate::from_ymd_opt(2019, 1, 1).unwrap() + chrono::Days::new(14 * t),
                    phq8: score as u8,
                    values,
                    flags: vec![],
                });
            }
        }
        (FeatureTable::new(rows), demos)
    }

    #[test]
    fn planted_effect_is_detected_with_matching_sign() {
        let (table, demos) = planted_table(5, 3.0);
        let scan = pairwise_associations(&table, &demos).unwrap();
        assert_eq!(scan.results.len(), N_FEATURES);
        assert!(scan.skipped.is_empty());
        let hit = scan.results.iter().find(|r| r.feature == "Mean_Mean").unwrap();
        assert!(hit.estimate > 0.0);
        assert!(hit.p_adjusted < 0.05, "adjusted p = {}", hit.p_adjusted);
        assert_eq!(hit.category, "statistical");
        // z = estimate/SE by construction.
        for r in &scan.results {
            assert_relative_eq!(r.z, r.estimate / r.se, max_relative = 1e-12);
            assert!(r.p_adjusted >= r.p_value - 1e-15);
            assert!(r.p_adjusted <= 1.0);
        }
    }

    #[test]
    fn constant_feature_is_skipped_with_reason() {
        let (mut table, demos) = planted_table(6, 0.0);
        for row in table.rows.iter_mut() {
            row.values[3] = 7.5;
        }
        let scan = pairwise_associations(&table, &demos).unwrap();
        assert_eq!(scan.results.len(), N_FEATURES - 1);
        assert_eq!(scan.skipped.len(), 1);
        assert_eq!(scan.skipped[0].feature, FEATURE_NAMES[3]);
        assert!(scan.skipped[0].reason.contains("constant"));
    }

    #[test]
    fn missing_demographics_is_an_error() {
        let (table, mut demos) = planted_table(7, 0.0);
        demos.pop();
        let err = pairwise_associations(&table, &demos).unwrap_err();
        assert!(err.to_string().contains("demographics"), "{err}");
    }

    /// Type-I calibration: with no true effect, the 0.05-level raw test on a
    /// designated null feature rejects at roughly its nominal rate.
    #[test]
    fn null_feature_rejection_rate_is_calibrated() {
        let reps = 200;
        let mut rejections = 0;
        for seed in 0..reps {
            let (table, demos) = planted_table(1000 + seed, 0.0);
            let scan = pairwise_associations(&table, &demos).unwrap();
            if scan.results[20].p_value < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / reps as f64;
        assert!(rate <= 0.10, "type-I rate {rate}");
    }

    #[test]
    fn nested_models_report_table_dfs() {
        let (table, demos) = planted_table(11, 1.0);
        let cmp = nested_model_comparison(&table, &demos).unwrap();
        assert_eq!(cmp.models.len(), 3);
        assert_eq!(cmp.models[0].n_params, 6);
        assert_eq!(cmp.models[1].n_params, 22);
        assert_eq!(cmp.models[2].n_params, 55);
        let dfs: Vec<usize> = cmp.tests.iter().map(|t| t.df).collect();
        assert_eq!(dfs, vec![16, 33, 49]);
        // Larger models never fit worse.
        assert!(cmp.models[1].log_likelihood >= cmp.models[0].log_likelihood - 1e-6);
        assert!(cmp.models[2].log_likelihood >= cmp.models[1].log_likelihood - 1e-6);
        for t in &cmp.tests {
            assert!(t.statistic >= 0.0);
            assert!((0.0..=1.0).contains(&t.p_value));
        }
        assert_relative_eq!(cmp.tests[0].critical_value, 26.296, epsilon = 5e-4);
        assert_relative_eq!(cmp.tests[1].critical_value, 47.400, epsilon = 5e-4);
        assert_relative_eq!(cmp.tests[2].critical_value, 66.339, epsilon = 5e-4);
    }

    /// The three band percentages sum to 1, aliasing one of them with the
    /// intercept; Model C must drop exactly that column and still fit.
    #[test]
    fn model_c_drops_the_redundant_percentage_column() {
        let (mut table, demos) = planted_table(13, 0.0);
        let lf = crate::features::feature_index("LF_pct").unwrap();
        let mf = crate::features::feature_index("MF_pct").unwrap();
        let hf = crate::features::feature_index("HF_pct").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for row in table.rows.iter_mut() {
            let a: f64 = rng.random_range(0.1..0.8);
            let b: f64 = rng.random_range(0.0..(1.0 - a));
            row.values[lf] = a;
            row.values[mf] = b;
            row.values[hf] = 1.0 - a - b;
        }
        let cmp = nested_model_comparison(&table, &demos).unwrap();
        assert_eq!(cmp.models[2].dropped, vec!["HF_pct".to_string()]);
        assert!(cmp.models[0].dropped.is_empty());
        assert!(cmp.models[1].dropped.is_empty());
        // Declared parameter counts are unaffected by the drop.
        assert_eq!(cmp.models[2].n_params, 55);
        assert_eq!(cmp.tests[2].df, 49);
    }

    #[test]
    fn gender_codes() {
        assert_eq!(gender_code(Gender::Female), 1.0);
        assert_eq!(gender_code(Gender::Male), 0.0);
        assert_eq!(gender_code(Gender::Other), 0.5);
    }
}
