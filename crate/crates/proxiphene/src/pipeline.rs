//! End-to-end operations behind the CLI subcommands.
//!
//! Each operation reads its inputs, delegates to the owning module, and
//! writes a deterministic artifact with an embedded reproducibility header
//! (see [`RunMeta`]). Readers accept exactly what the writers produce, so
//! stages can run one at a time or chained by [`run_all`].
//!
//! Artifacts, in pipeline order: `intervals.jsonl` + `rejections.csv`
//! (ingest), `features.csv` (extract), `associations.csv` (associate),
//! `lrt.json` (lrt), `splits_{lao,loo}.json` (cv-audit), `predictions.json`
//! (predict), and `report.md` plus the three plot CSVs (report).

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use chrono_tz::Tz;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cv::{
    run_cv, select_prediction_cohort, splits_for, CohortExclusion, CvOptions, CvSplit, ModelKind,
    Scheme,
};
use crate::domain::{validate_dataset, Gender, IssueSeverity, SourceLines};
use crate::error::{Error, Result};
use crate::features::{
    extract_features, FeatureConfig, FeatureTable, FeatureVector, FEATURE_NAMES, N_FEATURES,
};
use crate::inference::{
    nested_model_comparison, pairwise_associations, spearman_matrix, AssociationResult,
    AssociationScan, ModelComparison, SkippedFeature,
};
use crate::ingest::{
    assemble_intervals, bin_scans_to_days, DayGrid, NbdcInterval, HOURS_PER_DAY,
};
use crate::io::{self, RunMeta};
use crate::report::{
    dataset_summary, mse_profile_rows, render_report, spearman_rows, spectrum_rows, CellMetrics,
    PredictionReport, Table5Row, MSE_PLOT_FILE, SPEARMAN_PLOT_FILE, SPECTRUM_PLOT_FILE,
};
use crate::synth::{generate_cohort, GeneratorSpec};

/// Fixed artifact names used by `run_all` and the report's error messages.
pub const INTERVALS_FILE: &str = "intervals.jsonl";
pub const REJECTIONS_FILE: &str = "rejections.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const ASSOCIATIONS_FILE: &str = "associations.csv";
pub const LRT_FILE: &str = "lrt.json";
pub const PREDICTIONS_FILE: &str = "predictions.json";
pub const REPORT_FILE: &str = "report.md";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

// ---------------------------------------------------------------------------
// Intervals artifact
// ---------------------------------------------------------------------------

/// One line of `intervals.jsonl`. Carries the per-day dates alongside the
/// concatenated sequence so the full interval (and its invariants) can be
/// reconstructed without the raw scans.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub participant_id: String,
    pub phq8_date: NaiveDate,
    pub score: u8,
    pub n_valid_days: usize,
    pub dates: Vec<NaiveDate>,
    pub sequence: Vec<f64>,
}

impl From<&NbdcInterval> for IntervalRecord {
    fn from(iv: &NbdcInterval) -> Self {
        IntervalRecord {
            participant_id: iv.participant_id.clone(),
            phq8_date: iv.phq8.date,
            score: iv.phq8.score,
            n_valid_days: iv.n_valid_days(),
            dates: iv.days.iter().map(|d| d.date).collect(),
            sequence: iv.sequence.clone(),
        }
    }
}

impl IntervalRecord {
    /// Rebuilds the interval, chunking the sequence back into day grids,
    /// and re-checks every structural invariant.
    pub fn into_interval(self) -> Result<NbdcInterval> {
        if self.dates.len() != self.n_valid_days {
            return Err(Error::invalid_argument(format!(
                "interval record for {} at {}: {} dates but n_valid_days {}",
                self.participant_id,
                self.phq8_date,
                self.dates.len(),
                self.n_valid_days
            )));
        }
        if self.sequence.len() != self.dates.len() * HOURS_PER_DAY {
            return Err(Error::invalid_argument(format!(
                "interval record for {} at {}: sequence length {} != 24 * {} days",
                self.participant_id,
                self.phq8_date,
                self.sequence.len(),
                self.dates.len()
            )));
        }
        let days = self
            .dates
            .iter()
            .zip(self.sequence.chunks_exact(HOURS_PER_DAY))
            .map(|(date, chunk)| {
                let mut hours = [None; HOURS_PER_DAY];
                for (slot, v) in hours.iter_mut().zip(chunk) {
                    *slot = Some(*v);
                }
                DayGrid { participant_id: self.participant_id.clone(), date: *date, hours }
            })
            .collect();
        let interval = NbdcInterval {
            participant_id: self.participant_id.clone(),
            phq8: crate::domain::Phq8Record {
                participant_id: self.participant_id,
                date: self.phq8_date,
                score: self.score,
            },
            days,
            sequence: self.sequence,
        };
        interval.check_invariants()?;
        Ok(interval)
    }
}

fn write_jsonl<T: Serialize>(path: &Path, meta: &RunMeta, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let first = serde_json::to_string(&json!({ "meta": meta }))
        .map_err(|e| Error::parse(path, e.to_string()))?;
    io::write_line(path, &mut w, &first)?;
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::parse(path, e.to_string()))?;
        io::write_line(path, &mut w, &line)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `intervals.jsonl` and reconstructs the full intervals.
pub fn read_intervals_jsonl(path: &Path) -> Result<(RunMeta, Vec<NbdcInterval>)> {
    let (meta, lines) = io::read_jsonl_lines(path)?;
    let intervals = lines
        .iter()
        .map(|line| {
            let record: IntervalRecord = serde_json::from_str(line)
                .map_err(|e| Error::parse(path, format!("bad interval line: {e}")))?;
            record.into_interval()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((meta, intervals))
}

// ---------------------------------------------------------------------------
// Ingest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub timezone: Tz,
    pub cutoff: NaiveDate,
}

#[derive(Debug, Clone)]
pub struct IngestSummary {
    pub n_intervals: usize,
    pub n_rejections: usize,
    /// Non-fatal validation findings, already formatted for display.
    pub warnings: Vec<String>,
}

/// Validates the input tables, assembles intervals, and writes
/// `intervals.jsonl` plus the rejection ledger. Demographics are optional
/// here; they are only validated, not consumed.
pub fn run_ingest(
    scans_path: &Path,
    phq8_path: &Path,
    demo_path: Option<&Path>,
    config: &IngestConfig,
    out_path: &Path,
    rejections_path: &Path,
) -> Result<IngestSummary> {
    let (scans, scan_lines) = io::read_scans_csv(scans_path)?;
    let (phq8, phq_lines) = io::read_phq8_csv(phq8_path)?;
    let (demographics, demo_lines) = match demo_path {
        Some(p) => io::read_demographics_csv(p)?,
        None => (Vec::new(), Vec::new()),
    };
    let lines =
        SourceLines { scans: scan_lines, phq8: phq_lines, demographics: demo_lines };
    let report = validate_dataset(&scans, &phq8, &demographics, &lines);
    if !report.accepted() {
        let reasons =
            report.fatal().map(|i| i.to_string()).collect::<Vec<_>>().join("; ");
        return Err(Error::invalid_data("dataset", None, reasons));
    }
    let warnings = report
        .issues
        .iter()
        .filter(|i| i.severity == IssueSeverity::Warning)
        .map(|i| i.to_string())
        .collect();

    let days = bin_scans_to_days(&scans, config.timezone);
    let (intervals, rejections) = assemble_intervals(&days, &phq8, config.cutoff)?;

    let mut meta = RunMeta::new(json!({
        "op": "ingest",
        "timezone": config.timezone.name(),
        "cutoff": config.cutoff,
    }))
    .with_input(scans_path)?
    .with_input(phq8_path)?;
    if let Some(demo) = demo_path {
        meta = meta.with_input(demo)?;
    }

    let records: Vec<IntervalRecord> = intervals.iter().map(IntervalRecord::from).collect();
    write_jsonl(out_path, &meta, &records)?;

    let w = io::csv_writer_with_meta(rejections_path, &meta)?;
    let mut csv_w = csv::Writer::from_writer(w);
    csv_w
        .write_record(["participant_id", "date", "reason", "detail"])
        .map_err(|e| Error::parse(rejections_path, e.to_string()))?;
    for r in &rejections {
        csv_w
            .write_record([
                r.participant_id.as_str(),
                &r.date.to_string(),
                &r.reason.to_string(),
                &r.detail,
            ])
            .map_err(|e| Error::parse(rejections_path, e.to_string()))?;
    }
    csv_w.flush().map_err(|e| Error::io(rejections_path, e))?;

    Ok(IngestSummary { n_intervals: intervals.len(), n_rejections: rejections.len(), warnings })
}

// ---------------------------------------------------------------------------
// Extract
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ExtractSummary {
    pub n_rows: usize,
    /// Rows that raised degeneracy flags (capped entropies, zero-power bands).
    pub n_flagged: usize,
    /// Intervals whose extraction failed, with the reason; the run continues.
    pub skipped: Vec<String>,
}

fn features_header() -> Vec<String> {
    let mut header = vec!["participant_id".to_string(), "date".to_string(), "phq8".to_string()];
    header.extend(FEATURE_NAMES.iter().cloned());
    header.push("flags".to_string());
    header
}

/// Extracts the 49 features of every interval into `features.csv`, columns
/// in canonical order. A failed row is skipped with a comment in the
/// artifact rather than aborting the run.
pub fn run_extract(
    intervals_path: &Path,
    config: &FeatureConfig,
    out_path: &Path,
) -> Result<ExtractSummary> {
    let (_, intervals) = read_intervals_jsonl(intervals_path)?;
    let outcomes: Vec<Result<FeatureVector>> =
        intervals.par_iter().map(|iv| extract_features(iv, config)).collect();

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (iv, outcome) in intervals.iter().zip(outcomes) {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => skipped.push(format!(
                "participant {} interval {}: {e}",
                iv.participant_id, iv.phq8.date
            )),
        }
    }

    let meta = RunMeta::new(json!({ "op": "extract", "features": config }))
        .with_input(intervals_path)?;
    let mut w = io::csv_writer_with_meta(out_path, &meta)?;
    for s in &skipped {
        io::write_line(out_path, &mut w, &format!("# skipped {s}"))?;
    }
    let mut csv_w = csv::Writer::from_writer(w);
    csv_w
        .write_record(features_header())
        .map_err(|e| Error::parse(out_path, e.to_string()))?;
    for row in &rows {
        let mut record = vec![row.participant_id.clone(), row.date.to_string(), row.phq8.to_string()];
        record.extend(row.values.iter().map(|v| v.to_string()));
        record.push(row.flags.join(";"));
        csv_w.write_record(&record).map_err(|e| Error::parse(out_path, e.to_string()))?;
    }
    csv_w.flush().map_err(|e| Error::io(out_path, e))?;

    Ok(ExtractSummary {
        n_rows: rows.len(),
        n_flagged: rows.iter().filter(|r| !r.flags.is_empty()).count(),
        skipped,
    })
}

/// Reads `features.csv`, insisting on the exact canonical column layout.
pub fn read_features_csv(path: &Path) -> Result<FeatureTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let headers = reader.headers().map_err(|e| Error::parse(path, e.to_string()))?;
    let expected = features_header();
    let found: Vec<&str> = headers.iter().collect();
    if found != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::parse(
            path,
            format!("unexpected feature columns: expected the {N_FEATURES} canonical names"),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let line = record.position().map(|p| p.line());
        let bad = |field: &str, val: &str| Error::InvalidData {
            table: Some("features".into()),
            row: line,
            message: format!("{field} '{val}' failed to parse"),
        };
        let date: NaiveDate = record[1].parse().map_err(|_| bad("date", &record[1]))?;
        let phq8: u8 = record[2].parse().map_err(|_| bad("phq8", &record[2]))?;
        let values = (0..N_FEATURES)
            .map(|k| record[3 + k].parse::<f64>().map_err(|_| bad(&expected[3 + k], &record[3 + k])))
            .collect::<Result<Vec<f64>>>()?;
        let flags = record[3 + N_FEATURES]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        rows.push(FeatureVector {
            participant_id: record[0].to_string(),
            date,
            phq8,
            values,
            flags,
        });
    }
    Ok(FeatureTable::new(rows))
}

// ---------------------------------------------------------------------------
// Associate and LRT
// ---------------------------------------------------------------------------

/// Runs the pairwise association scan and writes `associations.csv`
/// (Table 3 columns plus the raw p-value). Skipped features are recorded as
/// `# skipped` comment lines in the same artifact.
pub fn run_associate(
    features_path: &Path,
    demo_path: &Path,
    out_path: &Path,
) -> Result<AssociationScan> {
    let table = read_features_csv(features_path)?;
    let (demographics, _) = io::read_demographics_csv(demo_path)?;
    let scan = pairwise_associations(&table, &demographics)?;

    let meta = RunMeta::new(json!({ "op": "associate" }))
        .with_input(features_path)?
        .with_input(demo_path)?;
    let mut w = io::csv_writer_with_meta(out_path, &meta)?;
    for s in &scan.skipped {
        io::write_line(out_path, &mut w, &format!("# skipped {}: {}", s.feature, s.reason))?;
    }
    let mut csv_w = csv::Writer::from_writer(w);
    csv_w
        .write_record(["feature", "category", "estimate", "std_error", "z", "p_value", "p_adjusted"])
        .map_err(|e| Error::parse(out_path, e.to_string()))?;
    for r in &scan.results {
        csv_w
            .write_record([
                r.feature.as_str(),
                &r.category,
                &r.estimate.to_string(),
                &r.se.to_string(),
                &r.z.to_string(),
                &r.p_value.to_string(),
                &r.p_adjusted.to_string(),
            ])
            .map_err(|e| Error::parse(out_path, e.to_string()))?;
    }
    csv_w.flush().map_err(|e| Error::io(out_path, e))?;
    Ok(scan)
}

/// Reads `associations.csv` back, including the skipped-feature comments.
pub fn read_associations_csv(
    path: &Path,
) -> Result<(Vec<AssociationResult>, Vec<SkippedFeature>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut skipped = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# skipped ") {
            let (feature, reason) = rest.split_once(": ").ok_or_else(|| {
                Error::parse(path, format!("malformed skipped line: {line}"))
            })?;
            skipped.push(SkippedFeature {
                feature: feature.to_string(),
                reason: reason.to_string(),
            });
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut results = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| Error::parse(path, format!("bad number '{}'", &record[i])))
        };
        results.push(AssociationResult {
            feature: record[0].to_string(),
            category: record[1].to_string(),
            estimate: num(2)?,
            se: num(3)?,
            z: num(4)?,
            p_value: num(5)?,
            p_adjusted: num(6)?,
        });
    }
    Ok((results, skipped))
}

/// Fits the three nested models and writes the comparison to `lrt.json`.
pub fn run_lrt(features_path: &Path, demo_path: &Path, out_path: &Path) -> Result<ModelComparison> {
    let table = read_features_csv(features_path)?;
    let (demographics, _) = io::read_demographics_csv(demo_path)?;
    let comparison = nested_model_comparison(&table, &demographics)?;
    let meta = RunMeta::new(json!({ "op": "lrt" }))
        .with_input(features_path)?
        .with_input(demo_path)?;
    io::write_json_with_meta(out_path, &meta, &comparison)?;
    Ok(comparison)
}

pub fn read_lrt_json(path: &Path) -> Result<ModelComparison> {
    let (_, value) = io::read_json_with_meta(path)?;
    serde_json::from_value(value).map_err(|e| Error::parse(path, format!("bad lrt artifact: {e}")))
}

// ---------------------------------------------------------------------------
// CV audit
// ---------------------------------------------------------------------------

/// `splits.json` payload: the filtered cohort's row key table plus every
/// split, for external leakage auditing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitsArtifact {
    pub scheme: Scheme,
    pub n_splits: usize,
    /// Row index -> (participant, questionnaire date) in the filtered cohort.
    pub rows: Vec<SplitRowKey>,
    pub exclusions: Vec<CohortExclusion>,
    pub splits: Vec<CvSplit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitRowKey {
    pub row: usize,
    pub participant_id: String,
    pub date: NaiveDate,
}

/// Applies the prediction-cohort filter and dumps every split of the scheme.
pub fn run_cv_audit(features_path: &Path, scheme: Scheme, out_path: &Path) -> Result<SplitsArtifact> {
    let table = read_features_csv(features_path)?;
    let (cohort, exclusions) = select_prediction_cohort(&table)?;
    let splits = splits_for(&cohort, scheme)?;
    let artifact = SplitsArtifact {
        scheme,
        n_splits: splits.len(),
        rows: cohort
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| SplitRowKey {
                row: i,
                participant_id: r.participant_id.clone(),
                date: r.date,
            })
            .collect(),
        exclusions,
        splits,
    };
    let meta = RunMeta::new(json!({ "op": "cv-audit", "scheme": scheme }))
        .with_input(features_path)?;
    io::write_json_with_meta(out_path, &meta, &artifact)?;
    Ok(artifact)
}

// ---------------------------------------------------------------------------
// Predict
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PredictConfig {
    pub schemes: Vec<Scheme>,
    pub models: Vec<ModelKind>,
    pub options: CvOptions,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            schemes: vec![Scheme::Lao, Scheme::Loo],
            models: vec![
                ModelKind::Baseline,
                ModelKind::Lasso,
                ModelKind::HblrStatistical,
                ModelKind::HblrAll,
            ],
            options: CvOptions::default(),
        }
    }
}

/// Display order of the prediction table, baseline first.
const MODEL_ORDER: [ModelKind; 4] = [
    ModelKind::Baseline,
    ModelKind::Lasso,
    ModelKind::HblrStatistical,
    ModelKind::HblrAll,
];

/// Cross-validates every requested (model, scheme) cell on the filtered
/// cohort and writes `predictions.json` in the prediction-table layout.
pub fn run_predict(
    features_path: &Path,
    demo_path: &Path,
    config: &PredictConfig,
    out_path: &Path,
) -> Result<PredictionReport> {
    let table = read_features_csv(features_path)?;
    let (demographics, _) = io::read_demographics_csv(demo_path)?;
    let (cohort, exclusions) = select_prediction_cohort(&table)?;

    let mut rows = Vec::new();
    for model in MODEL_ORDER {
        if !config.models.contains(&model) {
            continue;
        }
        let mut row = Table5Row {
            model: model.label().to_string(),
            display_name: model.display_name().to_string(),
            lao: None,
            loo: None,
        };
        for &scheme in &config.schemes {
            let outcome = run_cv(&cohort, &demographics, scheme, model, &config.options)?;
            *row.cell_mut(scheme) = Some(CellMetrics::from(&outcome));
        }
        rows.push(row);
    }

    let report = PredictionReport {
        rows,
        n_participants: cohort.participants().len(),
        n_intervals: cohort.len(),
        exclusions,
    };
    let meta = RunMeta::new(json!({
        "op": "predict",
        "schemes": config.schemes.iter().map(|s| s.label()).collect::<Vec<_>>(),
        "models": config.models.iter().map(|m| m.label()).collect::<Vec<_>>(),
        "chains": config.options.sampler.chains,
        "draws_per_chain": config.options.sampler.draws_per_chain,
        "burn_in": config.options.sampler.burn_in,
        "clip": config.options.clip,
    }))
    .with_input(features_path)?
    .with_input(demo_path)?
    .with_seed(config.options.seed);
    io::write_json_with_meta(out_path, &meta, &report)?;
    Ok(report)
}

pub fn read_predictions_json(path: &Path) -> Result<PredictionReport> {
    let (_, value) = io::read_json_with_meta(path)?;
    serde_json::from_value(value)
        .map_err(|e| Error::parse(path, format!("bad predictions artifact: {e}")))
}

// ---------------------------------------------------------------------------
// Simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub n_participants: usize,
    pub n_scans: usize,
    pub n_phq8: usize,
}

fn gender_str(gender: Gender) -> &'static str {
    match gender {
        Gender::Female => "female",
        Gender::Male => "male",
        Gender::Other => "other",
    }
}

/// Generates a synthetic cohort and writes the three input tables plus
/// `ground_truth.json` into `out_dir`. `spec_path`, when given, is hashed
/// into every header; `seed_override` replaces the spec's seed.
pub fn run_simulate(
    spec: &GeneratorSpec,
    spec_path: Option<&Path>,
    seed_override: Option<u64>,
    out_dir: &Path,
) -> Result<SimulateSummary> {
    let mut spec = spec.clone();
    if let Some(seed) = seed_override {
        spec.seed = seed;
    }
    let cohort = generate_cohort(&spec)?;

    let mut meta = RunMeta::new(json!({ "op": "simulate", "spec": spec })).with_seed(spec.seed);
    if let Some(p) = spec_path {
        meta = meta.with_input(p)?;
    }

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let scans_path = out_dir.join("scans.csv");
    let w = io::csv_writer_with_meta(&scans_path, &meta)?;
    let mut csv_w = csv::Writer::from_writer(w);
    csv_w
        .write_record(["participant_id", "timestamp", "device_count"])
        .map_err(|e| Error::parse(&scans_path, e.to_string()))?;
    for s in &cohort.scans {
        csv_w
            .write_record([
                s.participant_id.as_str(),
                &s.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                &s.device_count.to_string(),
            ])
            .map_err(|e| Error::parse(&scans_path, e.to_string()))?;
    }
    csv_w.flush().map_err(|e| Error::io(&scans_path, e))?;

    let phq8_path = out_dir.join("phq8.csv");
    let w = io::csv_writer_with_meta(&phq8_path, &meta)?;
    let mut csv_w = csv::Writer::from_writer(w);
    csv_w
        .write_record(["participant_id", "date", "score"])
        .map_err(|e| Error::parse(&phq8_path, e.to_string()))?;
    for r in &cohort.phq8 {
        csv_w
            .write_record([r.participant_id.as_str(), &r.date.to_string(), &r.score.to_string()])
            .map_err(|e| Error::parse(&phq8_path, e.to_string()))?;
    }
    csv_w.flush().map_err(|e| Error::io(&phq8_path, e))?;

    let demo_path = out_dir.join("demographics.csv");
    let w = io::csv_writer_with_meta(&demo_path, &meta)?;
    let mut csv_w = csv::Writer::from_writer(w);
    csv_w
        .write_record(["participant_id", "age", "gender", "education_years"])
        .map_err(|e| Error::parse(&demo_path, e.to_string()))?;
    for d in &cohort.demographics {
        csv_w
            .write_record([
                d.participant_id.as_str(),
                &d.age_years.to_string(),
                gender_str(d.gender),
                &d.education_years.to_string(),
            ])
            .map_err(|e| Error::parse(&demo_path, e.to_string()))?;
    }
    csv_w.flush().map_err(|e| Error::io(&demo_path, e))?;

    io::write_json_with_meta(&out_dir.join(GROUND_TRUTH_FILE), &meta, &cohort.truth)?;

    Ok(SimulateSummary {
        n_participants: cohort.demographics.len(),
        n_scans: cohort.scans.len(),
        n_phq8: cohort.phq8.len(),
    })
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// Upstream artifacts the report consumes.
#[derive(Debug, Clone)]
pub struct ReportInputs {
    pub features: PathBuf,
    pub intervals: PathBuf,
    pub associations: PathBuf,
    pub lrt: PathBuf,
    pub predictions: PathBuf,
}

impl ReportInputs {
    /// The fixed artifact names under one directory, as `run_all` lays
    /// them out.
    pub fn in_dir(dir: &Path) -> Self {
        ReportInputs {
            features: dir.join(FEATURES_FILE),
            intervals: dir.join(INTERVALS_FILE),
            associations: dir.join(ASSOCIATIONS_FILE),
            lrt: dir.join(LRT_FILE),
            predictions: dir.join(PREDICTIONS_FILE),
        }
    }
}

fn require_artifact(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::invalid_argument(format!(
            "missing artifact {}: run `proxiphene {producer}` first",
            path.display()
        )))
    }
}

fn write_plot_csv(path: &Path, meta: &RunMeta, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let w = io::csv_writer_with_meta(path, meta)?;
    let mut csv_w = csv::Writer::from_writer(w);
    csv_w.write_record(header).map_err(|e| Error::parse(path, e.to_string()))?;
    for row in rows {
        csv_w.write_record(row).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    csv_w.flush().map_err(|e| Error::io(path, e))
}

/// Renders `report.md` and the three plot CSVs from the upstream artifacts.
/// Any missing artifact is an error naming the subcommand that produces it.
pub fn run_report(inputs: &ReportInputs, out_dir: &Path) -> Result<Vec<PathBuf>> {
    require_artifact(&inputs.features, "extract")?;
    require_artifact(&inputs.intervals, "ingest")?;
    require_artifact(&inputs.associations, "associate")?;
    require_artifact(&inputs.lrt, "lrt")?;
    require_artifact(&inputs.predictions, "predict")?;

    let table = read_features_csv(&inputs.features)?;
    let (_, intervals) = read_intervals_jsonl(&inputs.intervals)?;
    let (results, skipped) = read_associations_csv(&inputs.associations)?;
    let comparison = read_lrt_json(&inputs.lrt)?;
    let prediction = read_predictions_json(&inputs.predictions)?;

    let summary = dataset_summary(&table)?;
    let scan = AssociationScan {
        results,
        skipped,
        n_obs: table.len(),
        n_participants: table.participants().len(),
    };

    let meta = RunMeta::new(json!({ "op": "report" }))
        .with_input(&inputs.features)?
        .with_input(&inputs.intervals)?
        .with_input(&inputs.associations)?
        .with_input(&inputs.lrt)?
        .with_input(&inputs.predictions)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let report_path = out_dir.join(REPORT_FILE);
    let mut text = String::new();
    for line in meta.comment_lines() {
        text.push_str(&format!("<!-- {} -->\n", line.trim_start_matches("# ")));
    }
    text.push('\n');
    text.push_str(&render_report(&summary, &scan, &comparison, &prediction));
    std::fs::write(&report_path, &text).map_err(|e| Error::io(&report_path, e))?;
    written.push(report_path);

    let mse_path = out_dir.join(MSE_PLOT_FILE);
    let mse_rows: Vec<Vec<String>> = mse_profile_rows(&table)?
        .iter()
        .map(|r| vec![r.band.clone(), r.scale.to_string(), r.mean.to_string(), r.n.to_string()])
        .collect();
    write_plot_csv(&mse_path, &meta, &["band", "scale", "mean", "n"], &mse_rows)?;
    written.push(mse_path);

    let spectrum_path = out_dir.join(SPECTRUM_PLOT_FILE);
    let spectrum: Vec<Vec<String>> = spectrum_rows(&intervals)?
        .iter()
        .map(|r| {
            vec![r.band.clone(), r.frequency.to_string(), r.mean_power.to_string(), r.n.to_string()]
        })
        .collect();
    write_plot_csv(&spectrum_path, &meta, &["band", "frequency", "mean_power", "n"], &spectrum)?;
    written.push(spectrum_path);

    let spearman_path = out_dir.join(SPEARMAN_PLOT_FILE);
    let spearman: Vec<Vec<String>> = if table.len() >= 3 {
        let columns: Vec<Vec<f64>> = (0..N_FEATURES).map(|k| table.column(k)).collect();
        let matrix = spearman_matrix(&columns, &FEATURE_NAMES)?;
        spearman_rows(&matrix)
            .iter()
            .map(|r| vec![r.feature_a.clone(), r.feature_b.clone(), r.rho.to_string()])
            .collect()
    } else {
        Vec::new()
    };
    write_plot_csv(&spearman_path, &meta, &["feature_a", "feature_b", "rho"], &spearman)?;
    written.push(spearman_path);

    Ok(written)
}

// ---------------------------------------------------------------------------
// Run-all
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RunAllConfig {
    pub ingest: IngestConfig,
    pub features: FeatureConfig,
    pub predict: PredictConfig,
}

/// Runs the whole pipeline into `out_dir` with the fixed artifact names.
/// Returns every path written, in creation order.
pub fn run_all(
    scans_path: &Path,
    phq8_path: &Path,
    demo_path: &Path,
    config: &RunAllConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let intervals = out_dir.join(INTERVALS_FILE);
    let rejections = out_dir.join(REJECTIONS_FILE);
    run_ingest(scans_path, phq8_path, Some(demo_path), &config.ingest, &intervals, &rejections)?;
    written.push(intervals.clone());
    written.push(rejections);

    let features = out_dir.join(FEATURES_FILE);
    run_extract(&intervals, &config.features, &features)?;
    written.push(features.clone());

    let associations = out_dir.join(ASSOCIATIONS_FILE);
    run_associate(&features, demo_path, &associations)?;
    written.push(associations);

    let lrt = out_dir.join(LRT_FILE);
    run_lrt(&features, demo_path, &lrt)?;
    written.push(lrt);

    for &scheme in &config.predict.schemes {
        let splits = out_dir.join(format!("splits_{}.json", scheme.label().to_lowercase()));
        run_cv_audit(&features, scheme, &splits)?;
        written.push(splits);
    }

    let predictions = out_dir.join(PREDICTIONS_FILE);
    run_predict(&features, demo_path, &config.predict, &predictions)?;
    written.push(predictions);

    written.extend(run_report(&ReportInputs::in_dir(out_dir), out_dir)?);
    Ok(written)
}
