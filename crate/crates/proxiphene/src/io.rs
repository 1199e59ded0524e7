//! File formats: input-table readers and analysis-artifact readers/writers.
//!
//! Input tables are plain CSV. Analysis artifacts additionally carry a
//! reproducibility header (see [`RunMeta`]): CSV files as leading `#` comment
//! lines, JSON Lines files as a first `{"meta": ...}` line, and JSON files as
//! a top-level `meta` field. All writers emit rows in a deterministic order
//! and never embed wall-clock values, so repeated runs are byte-identical.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read as _, Write as _};
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{Demographics, Gender, Phq8Record, ScanRecord, SourceLines};
use crate::error::{Error, Result};

/// Reproducibility header attached to every analysis artifact: tool version,
/// the configuration that produced the artifact, SHA-256 digests of the input
/// files, and the RNG seed when one was involved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool: String,
    pub config: serde_json::Value,
    /// Input file name (not path) to lowercase-hex SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunMeta {
    pub fn new(config: serde_json::Value) -> Self {
        RunMeta {
            tool: format!("proxiphene {}", env!("CARGO_PKG_VERSION")),
            config,
            inputs: BTreeMap::new(),
            seed: None,
        }
    }

    pub fn with_input(mut self, path: &Path) -> Result<Self> {
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.inputs.insert(name, sha256_file(path)?);
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// `# ...` comment lines placed above a CSV header.
    pub fn comment_lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("# tool: {}", self.tool),
            format!("# config: {}", self.config),
        ];
        for (name, digest) in &self.inputs {
            out.push(format!("# input sha256 {name}: {digest}"));
        }
        if let Some(seed) = self.seed {
            out.push(format!("# seed: {seed}"));
        }
        out
    }
}

/// Lowercase-hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

/// Lowercase-hex SHA-256 of a byte slice.
pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

// ---------------------------------------------------------------------------
// Input tables
// ---------------------------------------------------------------------------

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Maps required header names to column indices, erroring on any missing one.
fn header_indices(
    path: &Path,
    reader: &mut csv::Reader<File>,
    required: &[&str],
) -> Result<Vec<usize>> {
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, format!("cannot read header: {e}")))?
        .clone();
    required
        .iter()
        .map(|want| {
            headers
                .iter()
                .position(|h| h == *want)
                .ok_or_else(|| Error::parse(path, format!("missing required column '{want}'")))
        })
        .collect()
}

fn record_line(record: &csv::StringRecord) -> Option<u64> {
    record.position().map(|p| p.line())
}

fn field<'a>(
    path: &Path,
    table: &'static str,
    record: &'a csv::StringRecord,
    idx: usize,
) -> Result<&'a str> {
    record.get(idx).ok_or_else(|| Error::InvalidData {
        table: Some(table.into()),
        row: record_line(record),
        message: format!("row in {} is missing column {idx}", path.display()),
    })
}

/// Reads `scans.csv` (`participant_id,timestamp,device_count`). Timestamps
/// must be RFC 3339; counts must be non-negative integers.
pub fn read_scans_csv(path: &Path) -> Result<(Vec<ScanRecord>, Vec<u64>)> {
    let mut reader = csv_reader(path)?;
    let idx = header_indices(path, &mut reader, &["participant_id", "timestamp", "device_count"])?;
    let mut out = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let line = record_line(&record);
        let pid = field(path, "scans", &record, idx[0])?;
        let ts_raw = field(path, "scans", &record, idx[1])?;
        let count_raw = field(path, "scans", &record, idx[2])?;
        let timestamp = DateTime::parse_from_rfc3339(ts_raw)
            .map_err(|e| Error::InvalidData {
                table: Some("scans".into()),
                row: line,
                message: format!("timestamp '{ts_raw}' is not RFC 3339: {e}"),
            })?
            .with_timezone(&Utc);
        let device_count: u32 = count_raw.parse().map_err(|_| Error::InvalidData {
            table: Some("scans".into()),
            row: line,
            message: format!("device_count '{count_raw}' is not a non-negative integer"),
        })?;
        out.push(ScanRecord { participant_id: pid.to_string(), timestamp, device_count });
        lines.push(line.unwrap_or(0));
    }
    Ok((out, lines))
}

/// Reads `phq8.csv` (`participant_id,date,score`). Scores are parsed as
/// integers here; the 0..=24 range check happens in dataset validation so the
/// report can point at the offending line.
pub fn read_phq8_csv(path: &Path) -> Result<(Vec<Phq8Record>, Vec<u64>)> {
    let mut reader = csv_reader(path)?;
    let idx = header_indices(path, &mut reader, &["participant_id", "date", "score"])?;
    let mut out = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let line = record_line(&record);
        let pid = field(path, "phq8", &record, idx[0])?;
        let date_raw = field(path, "phq8", &record, idx[1])?;
        let score_raw = field(path, "phq8", &record, idx[2])?;
        let date: NaiveDate = date_raw.parse().map_err(|_| Error::InvalidData {
            table: Some("phq8".into()),
            row: line,
            message: format!("date '{date_raw}' is not YYYY-MM-DD"),
        })?;
        let score: u8 = score_raw.parse().map_err(|_| Error::InvalidData {
            table: Some("phq8".into()),
            row: line,
            message: format!("score '{score_raw}' is not an integer in 0..=255"),
        })?;
        out.push(Phq8Record { participant_id: pid.to_string(), date, score });
        lines.push(line.unwrap_or(0));
    }
    Ok((out, lines))
}

/// Reads `demographics.csv` (`participant_id,age,gender,education_years`).
pub fn read_demographics_csv(path: &Path) -> Result<(Vec<Demographics>, Vec<u64>)> {
    let mut reader = csv_reader(path)?;
    let idx = header_indices(
        path,
        &mut reader,
        &["participant_id", "age", "gender", "education_years"],
    )?;
    let mut out = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let line = record_line(&record);
        let pid = field(path, "demographics", &record, idx[0])?;
        let age_raw = field(path, "demographics", &record, idx[1])?;
        let gender_raw = field(path, "demographics", &record, idx[2])?;
        let edu_raw = field(path, "demographics", &record, idx[3])?;
        let age_years: f64 = age_raw.parse().map_err(|_| Error::InvalidData {
            table: Some("demographics".into()),
            row: line,
            message: format!("age '{age_raw}' is not a number"),
        })?;
        let education_years: f64 = edu_raw.parse().map_err(|_| Error::InvalidData {
            table: Some("demographics".into()),
            row: line,
            message: format!("education_years '{edu_raw}' is not a number"),
        })?;
        let gender = Gender::parse(gender_raw).map_err(|e| Error::InvalidData {
            table: Some("demographics".into()),
            row: line,
            message: e.to_string(),
        })?;
        out.push(Demographics {
            participant_id: pid.to_string(),
            age_years,
            gender,
            education_years,
        });
        lines.push(line.unwrap_or(0));
    }
    Ok((out, lines))
}

/// The three input tables plus source-line tracking for validation messages.
#[derive(Debug, Clone)]
pub struct LoadedInputs {
    pub scans: Vec<ScanRecord>,
    pub phq8: Vec<Phq8Record>,
    pub demographics: Vec<Demographics>,
    pub lines: SourceLines,
}

/// Reads all three input tables.
pub fn read_inputs(
    scans_path: &Path,
    phq8_path: &Path,
    demographics_path: &Path,
) -> Result<LoadedInputs> {
    let (scans, scan_lines) = read_scans_csv(scans_path)?;
    let (phq8, phq_lines) = read_phq8_csv(phq8_path)?;
    let (demographics, demo_lines) = read_demographics_csv(demographics_path)?;
    Ok(LoadedInputs {
        scans,
        phq8,
        demographics,
        lines: SourceLines { scans: scan_lines, phq8: phq_lines, demographics: demo_lines },
    })
}

// ---------------------------------------------------------------------------
// Low-level artifact helpers
// ---------------------------------------------------------------------------

/// Opens a buffered writer and emits the meta comment block.
pub(crate) fn csv_writer_with_meta(path: &Path, meta: &RunMeta) -> Result<BufWriter<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in meta.comment_lines() {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(w)
}

pub(crate) fn write_line(path: &Path, w: &mut impl std::io::Write, line: &str) -> Result<()> {
    writeln!(w, "{line}").map_err(|e| Error::io(path, e))
}

/// Serializes `value` as pretty JSON with `meta` injected as the first field.
pub fn write_json_with_meta<T: Serialize>(path: &Path, meta: &RunMeta, value: &T) -> Result<()> {
    let mut obj = serde_json::Map::new();
    obj.insert("meta".into(), serde_json::to_value(meta).expect("meta serializes"));
    let body = serde_json::to_value(value).map_err(|e| Error::parse(path, e.to_string()))?;
    match body {
        serde_json::Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("data".into(), other);
        }
    }
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(obj))
        .map_err(|e| Error::parse(path, e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Reads a JSON artifact written by [`write_json_with_meta`], returning the
/// meta header and the full document for field extraction.
pub fn read_json_with_meta(path: &Path) -> Result<(RunMeta, serde_json::Value)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    let meta = value
        .get("meta")
        .cloned()
        .ok_or_else(|| Error::parse(path, "missing 'meta' field"))?;
    let meta: RunMeta =
        serde_json::from_value(meta).map_err(|e| Error::parse(path, format!("bad meta: {e}")))?;
    Ok((meta, value))
}

/// Iterates the data lines of a JSONL artifact, skipping the leading meta line.
pub fn read_jsonl_lines(path: &Path) -> Result<(RunMeta, Vec<String>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let first = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::parse(path, "empty JSONL file")),
    };
    #[derive(Deserialize)]
    struct MetaLine {
        meta: RunMeta,
    }
    let meta: MetaLine = serde_json::from_str(&first)
        .map_err(|e| Error::parse(path, format!("first line is not a meta line: {e}")))?;
    let mut out = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok((meta.meta, out))
}
