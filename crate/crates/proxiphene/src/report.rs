//! Markdown report rendering and plot-ready data tables.
//!
//! [`render_report`] reproduces the three result-table layouts on whatever
//! dataset was analyzed: significant pairwise associations grouped by
//! feature category, the nested-model likelihood ratio tests, and the
//! cross-validated prediction scores. The plot builders emit long-format
//! rows for the MSE profile by severity band, the band-averaged spectrum,
//! and the feature-feature Spearman matrix; the pipeline serializes them
//! as CSV next to the report.

use serde::{Deserialize, Serialize};

use crate::cv::{CohortExclusion, CvOutcome, Scheme};
use crate::domain::{severity_band, SeverityBand};
use crate::error::{Error, Result};
use crate::features::frequency::power_spectrum;
use crate::features::{FeatureTable, N_MSE, N_STAT};
use crate::inference::{AssociationScan, ModelComparison, SpearmanMatrix};
use crate::ingest::{NbdcInterval, HOURS_PER_DAY, WINDOW_DAYS};

/// File names the report references and the pipeline writes.
pub const MSE_PLOT_FILE: &str = "plot_mse_profile.csv";
pub const SPECTRUM_PLOT_FILE: &str = "plot_spectrum.csv";
pub const SPEARMAN_PLOT_FILE: &str = "plot_spearman.csv";

const ALL_BANDS: [SeverityBand; 5] = [
    SeverityBand::None,
    SeverityBand::Mild,
    SeverityBand::Moderate,
    SeverityBand::ModeratelySevere,
    SeverityBand::Severe,
];

/// One scheme's pooled scores for one model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellMetrics {
    pub r2: Option<f64>,
    pub rmse: f64,
    pub n_test: usize,
    pub n_splits: usize,
    pub non_converged_splits: usize,
    pub max_r_hat: Option<f64>,
}

impl From<&CvOutcome> for CellMetrics {
    fn from(outcome: &CvOutcome) -> Self {
        CellMetrics {
            r2: outcome.metrics.r2,
            rmse: outcome.metrics.rmse,
            n_test: outcome.metrics.n_test,
            n_splits: outcome.n_splits,
            non_converged_splits: outcome.non_converged_splits,
            max_r_hat: outcome.max_r_hat,
        }
    }
}

/// One model's row of the prediction table; a cell is absent when that
/// scheme was not run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table5Row {
    pub model: String,
    pub display_name: String,
    pub lao: Option<CellMetrics>,
    pub loo: Option<CellMetrics>,
}

impl Table5Row {
    pub fn cell_mut(&mut self, scheme: Scheme) -> &mut Option<CellMetrics> {
        match scheme {
            Scheme::Lao => &mut self.lao,
            Scheme::Loo => &mut self.loo,
        }
    }
}

/// Prediction-table artifact: model rows plus the cohort the filter kept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionReport {
    pub rows: Vec<Table5Row>,
    pub n_participants: usize,
    pub n_intervals: usize,
    pub exclusions: Vec<CohortExclusion>,
}

/// Headline counts for the report's dataset section.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_intervals: usize,
    pub n_participants: usize,
    pub score_mean: f64,
    pub score_sd: f64,
    pub score_min: u8,
    pub score_max: u8,
    /// (band label, interval count), in severity order, zero bands kept.
    pub band_counts: Vec<(String, usize)>,
    /// Rows carrying extraction flags (capped entropies, zero-power bands).
    pub n_flagged: usize,
}

/// Summarizes the extracted feature table.
pub fn dataset_summary(table: &FeatureTable) -> Result<DatasetSummary> {
    if table.is_empty() {
        return Err(Error::invalid_argument("dataset summary needs at least one feature row"));
    }
    let scores = table.scores();
    let n = scores.len();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
    let mut counts = [0usize; 5];
    for row in &table.rows {
        let band = severity_band(row.phq8)?;
        counts[ALL_BANDS.iter().position(|b| *b == band).unwrap()] += 1;
    }
    Ok(DatasetSummary {
        n_intervals: n,
        n_participants: table.participants().len(),
        score_mean: mean,
        score_sd: var.sqrt(),
        score_min: table.rows.iter().map(|r| r.phq8).min().unwrap(),
        score_max: table.rows.iter().map(|r| r.phq8).max().unwrap(),
        band_counts: ALL_BANDS
            .iter()
            .zip(counts.iter())
            .map(|(b, c)| (b.label().to_string(), *c))
            .collect(),
        n_flagged: table.rows.iter().filter(|r| !r.flags.is_empty()).count(),
    })
}

/// Journal-style p-value: leading zero dropped, three decimals, trailing
/// zeros trimmed, tiny values shown as a bound.
fn fmt_p(p: f64) -> String {
    if p < 0.001 {
        return "<.001".to_string();
    }
    let s = format!("{p:.3}");
    let s = s.strip_prefix('0').unwrap_or(&s);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "1".to_string() } else { s.to_string() }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => "n/a".to_string(),
    }
}

fn category_heading(category: &str) -> &'static str {
    match category {
        "statistical" => "Second-order statistical",
        "entropy" => "Multiscale entropy",
        "frequency" => "Frequency-domain",
        _ => "Other",
    }
}

fn push_dataset_section(out: &mut String, summary: &DatasetSummary) {
    out.push_str("## Dataset\n\n");
    out.push_str(&format!(
        "- Intervals: {} from {} participants\n",
        summary.n_intervals, summary.n_participants
    ));
    out.push_str(&format!(
        "- PHQ-8 score: mean {:.1} (SD {:.1}), range {}-{}\n",
        summary.score_mean, summary.score_sd, summary.score_min, summary.score_max
    ));
    let bands = summary
        .band_counts
        .iter()
        .map(|(label, n)| format!("{label} {n}"))
        .collect::<Vec<_>>()
        .join(", ");
    out.push_str(&format!("- Severity bands: {bands}\n"));
    if summary.n_flagged > 0 {
        out.push_str(&format!(
            "- Rows with extraction flags: {} (capped entropy or zero-power bands)\n",
            summary.n_flagged
        ));
    }
    out.push('\n');
}

fn push_association_section(out: &mut String, scan: &AssociationScan) {
    out.push_str("## Pairwise associations\n\n");
    out.push_str(&format!(
        "{} features tested against the PHQ-8 score ({} observations, {} participants); \
         each model adjusts for age, gender, and education with a participant \
         random intercept. P-values are Benjamini-Hochberg adjusted.\n\n",
        scan.results.len(),
        scan.n_obs,
        scan.n_participants
    ));
    let significant: Vec<_> = scan.results.iter().filter(|r| r.p_adjusted < 0.05).collect();
    if significant.is_empty() {
        out.push_str("No significant associations (adjusted P < .05).\n\n");
    } else {
        out.push_str("| Feature | Estimate | SE | z score | Adjusted P-value |\n");
        out.push_str("|---|---|---|---|---|\n");
        let mut current = "";
        for r in &significant {
            if r.category != current {
                current = &r.category;
                out.push_str(&format!("| **{}** | | | | |\n", category_heading(current)));
            }
            out.push_str(&format!(
                "| {} | {:.3} | {:.3} | {:.3} | {} |\n",
                r.feature,
                r.estimate,
                r.se,
                r.z,
                fmt_p(r.p_adjusted)
            ));
        }
        out.push('\n');
        out.push_str(&format!(
            "{} of {} tested features significant at adjusted P < .05.\n\n",
            significant.len(),
            scan.results.len()
        ));
    }
    if !scan.skipped.is_empty() {
        let list = scan
            .skipped
            .iter()
            .map(|s| format!("{} ({})", s.feature, s.reason))
            .collect::<Vec<_>>()
            .join("; ");
        out.push_str(&format!("Skipped features: {list}.\n\n"));
    }
}

fn push_lrt_section(out: &mut String, comparison: &ModelComparison) {
    out.push_str("## Likelihood ratio tests\n\n");
    out.push_str(&format!(
        "Nested linear mixed-effect models fit by maximum likelihood on {} \
         observations from {} participants:\n\n",
        comparison.n_obs, comparison.n_participants
    ));
    for m in &comparison.models {
        let dropped = if m.dropped.is_empty() {
            String::new()
        } else {
            format!("; dropped as aliased: {}", m.dropped.join(", "))
        };
        out.push_str(&format!(
            "- Model {}: {} ({} fixed effects, log-likelihood {:.3}{})\n",
            m.name, m.description, m.n_fixed_effects, m.log_likelihood, dropped
        ));
    }
    out.push('\n');
    out.push_str("| Model | Diff. of parameters | χ² | Critical value (α=.05) | P-value |\n");
    out.push_str("|---|---|---|---|---|\n");
    for t in &comparison.tests {
        out.push_str(&format!(
            "| Model {} vs Model {} | {} | {:.2} | {:.3} | {} |\n",
            t.full_model,
            t.reduced_model,
            t.df,
            t.statistic,
            t.critical_value,
            fmt_p(t.p_value)
        ));
    }
    out.push('\n');
}

fn push_prediction_section(out: &mut String, prediction: &PredictionReport) {
    out.push_str("## Prediction\n\n");
    out.push_str(&format!(
        "Cohort after the prediction filter (at least 3 intervals and a PHQ-8 \
         range of at least 5): {} participants, {} intervals",
        prediction.n_participants, prediction.n_intervals
    ));
    if prediction.exclusions.is_empty() {
        out.push_str(".\n\n");
    } else {
        out.push_str(&format!("; {} participants excluded.\n\n", prediction.exclusions.len()));
    }
    out.push_str("| Model | LAO R² | LAO RMSE | LOO R² | LOO RMSE |\n");
    out.push_str("|---|---|---|---|---|\n");
    for row in &prediction.rows {
        let (lao_r2, lao_rmse) = match &row.lao {
            Some(c) => (fmt_opt(c.r2), format!("{:.3}", c.rmse)),
            None => ("n/a".to_string(), "n/a".to_string()),
        };
        let (loo_r2, loo_rmse) = match &row.loo {
            Some(c) => (fmt_opt(c.r2), format!("{:.3}", c.rmse)),
            None => ("n/a".to_string(), "n/a".to_string()),
        };
        out.push_str(&format!(
            "| {} | {lao_r2} | {lao_rmse} | {loo_r2} | {loo_rmse} |\n",
            row.display_name
        ));
    }
    out.push('\n');
    let mut failures = Vec::new();
    let mut any_sampled = false;
    for row in &prediction.rows {
        for (scheme, cell) in [("LAO", &row.lao), ("LOO", &row.loo)] {
            if let Some(c) = cell {
                if c.max_r_hat.is_some() {
                    any_sampled = true;
                }
                if c.non_converged_splits > 0 {
                    let detail = match c.max_r_hat {
                        Some(worst) => format!(
                            "{} of {} splits above the split R-hat 1.05 threshold (worst {worst:.3})",
                            c.non_converged_splits, c.n_splits
                        ),
                        None => format!(
                            "{} of {} splits hit the coordinate-descent sweep cap",
                            c.non_converged_splits, c.n_splits
                        ),
                    };
                    failures.push(format!("{} ({scheme}): {detail}", row.display_name));
                }
            }
        }
    }
    if failures.is_empty() {
        if any_sampled {
            out.push_str("All sampler runs converged (split R-hat < 1.05).\n\n");
        }
    } else {
        out.push_str("Convergence warnings:\n\n");
        for f in &failures {
            out.push_str(&format!("- {f}\n"));
        }
        out.push('\n');
    }
}

/// Renders the full markdown report body.
pub fn render_report(
    summary: &DatasetSummary,
    scan: &AssociationScan,
    comparison: &ModelComparison,
    prediction: &PredictionReport,
) -> String {
    let mut out = String::new();
    out.push_str("# NBDC depression analysis\n\n");
    push_dataset_section(&mut out, summary);
    push_association_section(&mut out, scan);
    push_lrt_section(&mut out, comparison);
    push_prediction_section(&mut out, prediction);
    out.push_str("## Plot data\n\n");
    out.push_str(&format!(
        "- `{MSE_PLOT_FILE}`: mean multiscale entropy per severity band and scale \
         (band, scale, mean, n)\n"
    ));
    out.push_str(&format!(
        "- `{SPECTRUM_PLOT_FILE}`: band-averaged one-sided power spectrum over \
         full-length intervals (band, frequency, mean_power, n)\n"
    ));
    out.push_str(&format!(
        "- `{SPEARMAN_PLOT_FILE}`: pairwise Spearman correlations between all \
         features (feature_a, feature_b, rho)\n"
    ));
    out
}

/// One severity band's mean entropy at one scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MseProfileRow {
    pub band: String,
    pub scale: usize,
    pub mean: f64,
    pub n: usize,
}

/// Averages each MSE column within each severity band. Bands without rows
/// are omitted; order is severity then scale.
pub fn mse_profile_rows(table: &FeatureTable) -> Result<Vec<MseProfileRow>> {
    let mut sums = vec![[0.0f64; N_MSE]; ALL_BANDS.len()];
    let mut counts = [0usize; 5];
    for row in &table.rows {
        let band = severity_band(row.phq8)?;
        let b = ALL_BANDS.iter().position(|x| *x == band).unwrap();
        counts[b] += 1;
        for t in 0..N_MSE {
            sums[b][t] += row.values[N_STAT + t];
        }
    }
    let mut out = Vec::new();
    for (b, band) in ALL_BANDS.iter().enumerate() {
        if counts[b] == 0 {
            continue;
        }
        for t in 0..N_MSE {
            out.push(MseProfileRow {
                band: band.label().to_string(),
                scale: t + 1,
                mean: sums[b][t] / counts[b] as f64,
                n: counts[b],
            });
        }
    }
    Ok(out)
}

/// One spectrum bin of one severity band's average.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub band: String,
    /// Cycles per day.
    pub frequency: f64,
    pub mean_power: f64,
    pub n: usize,
}

/// Averages the one-sided power spectrum within each severity band.
///
/// Only full-length intervals (no dropped days) are used, so every
/// spectrum shares one frequency grid; shorter intervals are skipped.
pub fn spectrum_rows(intervals: &[NbdcInterval]) -> Result<Vec<SpectrumRow>> {
    let full_len = WINDOW_DAYS as usize * HOURS_PER_DAY;
    let n_bins = full_len / 2 + 1;
    let mut sums = vec![vec![0.0f64; n_bins]; ALL_BANDS.len()];
    let mut counts = [0usize; 5];
    let mut frequencies: Option<Vec<f64>> = None;
    for iv in intervals {
        if iv.sequence.len() != full_len {
            continue;
        }
        let spectrum = power_spectrum(&iv.sequence)?;
        let band = severity_band(iv.phq8.score)?;
        let b = ALL_BANDS.iter().position(|x| *x == band).unwrap();
        counts[b] += 1;
        for (slot, p) in sums[b].iter_mut().zip(spectrum.power.iter()) {
            *slot += p;
        }
        if frequencies.is_none() {
            frequencies = Some(spectrum.frequencies);
        }
    }
    let Some(frequencies) = frequencies else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for (b, band) in ALL_BANDS.iter().enumerate() {
        if counts[b] == 0 {
            continue;
        }
        for (k, f) in frequencies.iter().enumerate() {
            out.push(SpectrumRow {
                band: band.label().to_string(),
                frequency: *f,
                mean_power: sums[b][k] / counts[b] as f64,
                n: counts[b],
            });
        }
    }
    Ok(out)
}

/// One cell of the Spearman matrix in long format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpearmanRow {
    pub feature_a: String,
    pub feature_b: String,
    pub rho: f64,
}

/// Flattens the matrix row-major, diagonal included.
pub fn spearman_rows(matrix: &SpearmanMatrix) -> Vec<SpearmanRow> {
    let mut out = Vec::with_capacity(matrix.names.len() * matrix.names.len());
    for (i, a) in matrix.names.iter().enumerate() {
        for (j, b) in matrix.names.iter().enumerate() {
            out.push(SpearmanRow {
                feature_a: a.clone(),
                feature_b: b.clone(),
                rho: matrix.values[i][j],
            });
        }
    }
    out
}
