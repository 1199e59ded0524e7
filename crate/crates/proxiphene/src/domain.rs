//! Core study entities and dataset-level validation.
//!
//! The pipeline consumes three tables: Bluetooth scan events, biweekly PHQ-8
//! self-reports, and one demographics row per participant. This module owns
//! the typed records, the PHQ-8 severity banding, and the cross-table
//! validation pass that decides whether a dataset is fit to ingest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One Bluetooth scan: how many distinct nearby devices were seen at an
/// instant. Timestamps are stored in UTC and localized only when binning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub participant_id: String,
    pub timestamp: DateTime<Utc>,
    pub device_count: u32,
}

/// One PHQ-8 questionnaire completion. `score` is guaranteed in `0..=24`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phq8Record {
    pub participant_id: String,
    pub date: NaiveDate,
    pub score: u8,
}

impl Phq8Record {
    pub fn new(participant_id: impl Into<String>, date: NaiveDate, score: u8) -> Result<Self> {
        if score > 24 {
            return Err(Error::invalid_argument(format!(
                "PHQ-8 score {score} outside 0..=24"
            )));
        }
        Ok(Phq8Record { participant_id: participant_id.into(), date, score })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Other,
}

impl Gender {
    /// Lenient parse: `f`/`female`, `m`/`male` (any case); everything else
    /// non-empty maps to `Other`.
    pub fn parse(raw: &str) -> Result<Gender> {
        let t = raw.trim().to_ascii_lowercase();
        match t.as_str() {
            "f" | "female" => Ok(Gender::Female),
            "m" | "male" => Ok(Gender::Male),
            "" => Err(Error::invalid_argument("empty gender field")),
            _ => Ok(Gender::Other),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Other => "other",
        };
        f.write_str(s)
    }
}

/// Stable covariates, one row per participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub participant_id: String,
    pub age_years: f64,
    pub gender: Gender,
    pub education_years: f64,
}

/// PHQ-8 severity band, standard cut points at 5, 10, 15, 20.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityBand {
    None,
    Mild,
    Moderate,
    ModeratelySevere,
    Severe,
}

impl SeverityBand {
    pub fn label(&self) -> &'static str {
        match self {
            SeverityBand::None => "none",
            SeverityBand::Mild => "mild",
            SeverityBand::Moderate => "moderate",
            SeverityBand::ModeratelySevere => "moderately severe",
            SeverityBand::Severe => "severe",
        }
    }
}

/// Maps a PHQ-8 total score to its severity band. Errors above 24.
pub fn severity_band(score: u8) -> Result<SeverityBand> {
    match score {
        0..=4 => Ok(SeverityBand::None),
        5..=9 => Ok(SeverityBand::Mild),
        10..=14 => Ok(SeverityBand::Moderate),
        15..=19 => Ok(SeverityBand::ModeratelySevere),
        20..=24 => Ok(SeverityBand::Severe),
        _ => Err(Error::invalid_argument(format!(
            "PHQ-8 score {score} outside 0..=24"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueSeverity {
    /// Dataset is rejected.
    Fatal,
    /// Dataset proceeds; the condition is reported.
    Warning,
}

/// One finding from [`validate_dataset`]. `line` is the 1-based line number
/// in the source file when the caller tracked it.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationIssue {
    pub severity: IssueSeverity,
    pub table: &'static str,
    pub line: Option<u64>,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            IssueSeverity::Fatal => "fatal",
            IssueSeverity::Warning => "warning",
        };
        match self.line {
            Some(l) => write!(f, "{sev}: {} line {l}: {}", self.table, self.message),
            None => write!(f, "{sev}: {}: {}", self.table, self.message),
        }
    }
}

/// Outcome of the cross-table validation pass.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.issues.iter().all(|i| i.severity != IssueSeverity::Fatal)
    }

    pub fn fatal(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == IssueSeverity::Fatal)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == IssueSeverity::Warning)
    }

    /// Turns a rejected report into an error carrying the first fatal issue.
    pub fn into_result(self) -> Result<ValidationReport> {
        let n_fatal = self.issues.iter().filter(|i| i.severity == IssueSeverity::Fatal).count();
        let first = self.issues.iter().find(|i| i.severity == IssueSeverity::Fatal);
        match first {
            None => Ok(self),
            Some(first) => Err(Error::InvalidData {
                table: Some(first.table.to_string()),
                row: first.line,
                message: format!("{} ({n_fatal} fatal issue(s) total)", first.message),
            }),
        }
    }
}

/// Line numbers for records whose source position the reader tracked,
/// parallel to the record slices passed to [`validate_dataset`].
#[derive(Debug, Clone, Default)]
pub struct SourceLines {
    pub scans: Vec<u64>,
    pub phq8: Vec<u64>,
    pub demographics: Vec<u64>,
}

fn line_of(lines: &[u64], idx: usize) -> Option<u64> {
    lines.get(idx).copied()
}

/// Cross-table consistency checks.
///
/// Fatal: out-of-range PHQ-8 scores, duplicate demographics rows, and
/// non-finite or negative covariates. Warnings: participants with scans but
/// no questionnaires or demographics (their scans are retained but can never
/// form an interval), duplicate questionnaire dates (resolved later as
/// `duplicate_record` rejections), and empty tables. Empty tables alone do
/// not reject a dataset.
pub fn validate_dataset(
    scans: &[ScanRecord],
    phq8: &[Phq8Record],
    demographics: &[Demographics],
    lines: &SourceLines,
) -> ValidationReport {
    let mut issues = Vec::new();

    for (table, empty) in [
        ("scans", scans.is_empty()),
        ("phq8", phq8.is_empty()),
        ("demographics", demographics.is_empty()),
    ] {
        if empty {
            issues.push(ValidationIssue {
                severity: IssueSeverity::Warning,
                table,
                line: None,
                message: "table is empty".into(),
            });
        }
    }

    for (i, rec) in phq8.iter().enumerate() {
        if rec.score > 24 {
            issues.push(ValidationIssue {
                severity: IssueSeverity::Fatal,
                table: "phq8",
                line: line_of(&lines.phq8, i),
                message: format!(
                    "participant {}: score {} outside 0..=24",
                    rec.participant_id, rec.score
                ),
            });
        }
    }

    let mut seen_phq: BTreeMap<(&str, NaiveDate), usize> = BTreeMap::new();
    for (i, rec) in phq8.iter().enumerate() {
        if let Some(_first) = seen_phq.insert((rec.participant_id.as_str(), rec.date), i) {
            issues.push(ValidationIssue {
                severity: IssueSeverity::Warning,
                table: "phq8",
                line: line_of(&lines.phq8, i),
                message: format!(
                    "participant {} has multiple questionnaires dated {}; later rows will be rejected as duplicate_record",
                    rec.participant_id, rec.date
                ),
            });
        }
    }

    let mut seen_demo: BTreeSet<&str> = BTreeSet::new();
    for (i, rec) in demographics.iter().enumerate() {
        if !seen_demo.insert(rec.participant_id.as_str()) {
            issues.push(ValidationIssue {
                severity: IssueSeverity::Fatal,
                table: "demographics",
                line: line_of(&lines.demographics, i),
                message: format!("duplicate demographics row for participant {}", rec.participant_id),
            });
        }
        for (name, v) in [("age", rec.age_years), ("education_years", rec.education_years)] {
            if !v.is_finite() || v < 0.0 {
                issues.push(ValidationIssue {
                    severity: IssueSeverity::Fatal,
                    table: "demographics",
                    line: line_of(&lines.demographics, i),
                    message: format!(
                        "participant {}: {name} = {v} is not a non-negative finite number",
                        rec.participant_id
                    ),
                });
            }
        }
    }

    let phq_ids: BTreeSet<&str> = phq8.iter().map(|r| r.participant_id.as_str()).collect();
    let demo_ids: BTreeSet<&str> = demographics.iter().map(|r| r.participant_id.as_str()).collect();
    let scan_ids: BTreeSet<&str> = scans.iter().map(|r| r.participant_id.as_str()).collect();

    for id in &scan_ids {
        let missing: Vec<&str> = [("phq8", phq_ids.contains(id)), ("demographics", demo_ids.contains(id))]
            .iter()
            .filter(|(_, present)| !present)
            .map(|(t, _)| *t)
            .collect();
        if !missing.is_empty() {
            issues.push(ValidationIssue {
                severity: IssueSeverity::Warning,
                table: "scans",
                line: None,
                message: format!(
                    "participant {} has scans but no {} row(s); scans retained, no intervals will form",
                    id,
                    missing.join(" or ")
                ),
            });
        }
    }

    for id in &phq_ids {
        if !demo_ids.contains(id) {
            issues.push(ValidationIssue {
                severity: IssueSeverity::Warning,
                table: "phq8",
                line: None,
                message: format!(
                    "participant {id} has questionnaires but no demographics row; excluded from modelling stages"
                ),
            });
        }
    }

    ValidationReport { issues }
}
