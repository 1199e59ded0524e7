//! Ingestion: hourly binning, within-day interpolation, interval assembly.
//!
//! A *day grid* holds the 24 hourly NBDC slots of one participant-day, where
//! each observed slot is the mean device count over that hour's scans. A day
//! is valid when at least [`MIN_OBSERVED_HOURS`] slots are observed; valid
//! days are completed by linear interpolation within the day only.
//!
//! For each PHQ-8 completion the *interval* covers the [`WINDOW_DAYS`] days
//! immediately before the questionnaire date. Invalid or absent days are
//! dropped; the remaining days are interpolated and concatenated in
//! chronological order. An interval is kept when at least [`MIN_VALID_DAYS`]
//! days survive, so sequences run 240 to 336 samples. Every excluded
//! questionnaire lands in the rejection ledger with a machine-readable
//! reason.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, NaiveDate, TimeZone, Timelike};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::domain::{Phq8Record, ScanRecord};
use crate::error::{Error, Result};

pub const HOURS_PER_DAY: usize = 24;
/// Minimum observed hourly slots for a day to count as valid.
pub const MIN_OBSERVED_HOURS: usize = 12;
/// Days covered by one pre-questionnaire interval.
pub const WINDOW_DAYS: i64 = 14;
/// Minimum valid days for an interval to be retained.
pub const MIN_VALID_DAYS: usize = 10;

/// Hourly NBDC slots for one participant-day. `None` marks an hour with no
/// scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayGrid {
    pub participant_id: String,
    pub date: NaiveDate,
    pub hours: [Option<f64>; HOURS_PER_DAY],
}

impl DayGrid {
    pub fn observed_hours(&self) -> usize {
        self.hours.iter().filter(|h| h.is_some()).count()
    }

    /// At least [`MIN_OBSERVED_HOURS`] slots observed.
    pub fn is_valid(&self) -> bool {
        self.observed_hours() >= MIN_OBSERVED_HOURS
    }

    pub fn is_fully_populated(&self) -> bool {
        self.hours.iter().all(|h| h.is_some())
    }

    /// The 24 values of a fully populated day, hour 0 first.
    pub fn values(&self) -> Option<[f64; HOURS_PER_DAY]> {
        let mut out = [0.0; HOURS_PER_DAY];
        for (slot, v) in out.iter_mut().zip(self.hours.iter()) {
            *slot = (*v)?;
        }
        Some(out)
    }
}

/// Bins scans into hourly day grids in the given timezone.
///
/// Each scan is localized to `tz`; the slot value is the mean `device_count`
/// over the scans falling in that local hour. Output is sorted by
/// participant, then date.
pub fn bin_scans_to_days(scans: &[ScanRecord], tz: Tz) -> Vec<DayGrid> {
    // (sum, count) accumulator per (participant, date, hour).
    let mut acc: BTreeMap<(String, NaiveDate), [(f64, u32); HOURS_PER_DAY]> = BTreeMap::new();
    for scan in scans {
        let local = tz.from_utc_datetime(&scan.timestamp.naive_utc());
        let date = local.date_naive();
        let hour = local.hour() as usize;
        let day = acc
            .entry((scan.participant_id.clone(), date))
            .or_insert([(0.0, 0); HOURS_PER_DAY]);
        day[hour].0 += scan.device_count as f64;
        day[hour].1 += 1;
    }
    acc.into_iter()
        .map(|((participant_id, date), slots)| {
            let mut hours = [None; HOURS_PER_DAY];
            for (h, (sum, count)) in slots.iter().enumerate() {
                if *count > 0 {
                    hours[h] = Some(sum / *count as f64);
                }
            }
            DayGrid { participant_id, date, hours }
        })
        .collect()
}

/// Fills the missing slots of a valid day by linear interpolation between the
/// nearest observed hours; slots before the first (after the last)
/// observation take the first (last) observed value.
///
/// Errors when the day is not valid. Fully populated days pass through
/// unchanged, so the operation is idempotent.
pub fn interpolate_day(day: &DayGrid) -> Result<DayGrid> {
    if !day.is_valid() {
        return Err(Error::invalid_argument(format!(
            "day {} of participant {} has {} observed hours, need at least {MIN_OBSERVED_HOURS}",
            day.date,
            day.participant_id,
            day.observed_hours()
        )));
    }
    let observed: Vec<(usize, f64)> = day
        .hours
        .iter()
        .enumerate()
        .filter_map(|(h, v)| v.map(|x| (h, x)))
        .collect();
    let mut hours = day.hours;
    let (first_h, first_v) = observed[0];
    let (last_h, last_v) = *observed.last().expect("valid day has observations");
    for h in 0..first_h {
        hours[h] = Some(first_v);
    }
    for h in (last_h + 1)..HOURS_PER_DAY {
        hours[h] = Some(last_v);
    }
    for pair in observed.windows(2) {
        let (a, va) = pair[0];
        let (b, vb) = pair[1];
        for h in (a + 1)..b {
            let t = (h - a) as f64 / (b - a) as f64;
            hours[h] = Some(va + (vb - va) * t);
        }
    }
    Ok(DayGrid { participant_id: day.participant_id.clone(), date: day.date, hours })
}

/// One retained 14-day pre-questionnaire interval.
///
/// `days` are the interpolated valid days in chronological order; `sequence`
/// is their hourly values concatenated, so `sequence.len() == 24 * days.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct NbdcInterval {
    pub participant_id: String,
    pub phq8: Phq8Record,
    pub days: Vec<DayGrid>,
    pub sequence: Vec<f64>,
}

impl NbdcInterval {
    pub fn n_valid_days(&self) -> usize {
        self.days.len()
    }

    /// Checks the structural invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<()> {
        if self.days.len() < MIN_VALID_DAYS {
            return Err(Error::invalid_argument(format!(
                "interval has {} days, need at least {MIN_VALID_DAYS}",
                self.days.len()
            )));
        }
        if self.sequence.len() != HOURS_PER_DAY * self.days.len() {
            return Err(Error::invalid_argument("sequence length != 24 * days"));
        }
        let lo = self.phq8.date - chrono::Duration::days(WINDOW_DAYS);
        let hi = self.phq8.date - chrono::Duration::days(1);
        for pair in self.days.windows(2) {
            if pair[0].date >= pair[1].date {
                return Err(Error::invalid_argument("days not strictly increasing"));
            }
        }
        for day in &self.days {
            if day.date < lo || day.date > hi {
                return Err(Error::invalid_argument(format!(
                    "day {} outside window {lo}..={hi}",
                    day.date
                )));
            }
            if !day.is_fully_populated() {
                return Err(Error::invalid_argument("interval day not fully populated"));
            }
        }
        if !self.sequence.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid_argument("non-finite value in sequence"));
        }
        Ok(())
    }
}

/// Why a questionnaire produced no interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    /// Questionnaire dated on or after the analysis cutoff.
    AfterCutoff,
    /// Fewer than [`MIN_VALID_DAYS`] valid days in the window.
    InsufficientValidDays,
    /// Another questionnaire with the same participant and date came first.
    DuplicateRecord,
}

impl RejectionReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectionReason::AfterCutoff => "after_cutoff",
            RejectionReason::InsufficientValidDays => "insufficient_valid_days",
            RejectionReason::DuplicateRecord => "duplicate_record",
        }
    }

    pub fn parse(raw: &str) -> Result<Self> {
        match raw {
            "after_cutoff" => Ok(RejectionReason::AfterCutoff),
            "insufficient_valid_days" => Ok(RejectionReason::InsufficientValidDays),
            "duplicate_record" => Ok(RejectionReason::DuplicateRecord),
            _ => Err(Error::invalid_argument(format!("unknown rejection reason '{raw}'"))),
        }
    }
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ledger entry for one excluded questionnaire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub participant_id: String,
    pub date: NaiveDate,
    pub reason: RejectionReason,
    /// Human-readable specifics, e.g. the valid-day count.
    pub detail: String,
}

/// Builds intervals for every questionnaire, in (participant, date) order.
///
/// Rules, applied in order per questionnaire:
/// 1. dated on or after `cutoff` -> [`RejectionReason::AfterCutoff`];
/// 2. same (participant, date) as an earlier input row ->
///    [`RejectionReason::DuplicateRecord`] (first row wins);
/// 3. fewer than [`MIN_VALID_DAYS`] valid days in the 14-day window ->
///    [`RejectionReason::InsufficientValidDays`].
///
/// Every questionnaire appears in exactly one of the two outputs.
pub fn assemble_intervals(
    days: &[DayGrid],
    phq8: &[Phq8Record],
    cutoff: NaiveDate,
) -> Result<(Vec<NbdcInterval>, Vec<Rejection>)> {
    let mut by_key: BTreeMap<(&str, NaiveDate), &DayGrid> = BTreeMap::new();
    for day in days {
        by_key.insert((day.participant_id.as_str(), day.date), day);
    }

    let mut seen: std::collections::BTreeSet<(&str, NaiveDate)> = Default::default();
    let mut intervals = Vec::new();
    let mut rejections = Vec::new();

    for rec in phq8 {
        if rec.score > 24 {
            return Err(Error::invalid_argument(format!(
                "questionnaire for {} on {} has score {} outside 0..=24; run dataset validation first",
                rec.participant_id, rec.date, rec.score
            )));
        }
        if rec.date >= cutoff {
            rejections.push(Rejection {
                participant_id: rec.participant_id.clone(),
                date: rec.date,
                reason: RejectionReason::AfterCutoff,
                detail: format!("questionnaire dated {} on or after cutoff {cutoff}", rec.date),
            });
            continue;
        }
        if !seen.insert((rec.participant_id.as_str(), rec.date)) {
            rejections.push(Rejection {
                participant_id: rec.participant_id.clone(),
                date: rec.date,
                reason: RejectionReason::DuplicateRecord,
                detail: "earlier questionnaire with same participant and date kept".into(),
            });
            continue;
        }
        let lo = rec.date - chrono::Duration::days(WINDOW_DAYS);
        let mut valid_days = Vec::new();
        let mut d = lo;
        while d < rec.date {
            if let Some(day) = by_key.get(&(rec.participant_id.as_str(), d)) {
                if day.is_valid() {
                    valid_days.push(*day);
                }
            }
            d += chrono::Duration::days(1);
        }
        if valid_days.len() < MIN_VALID_DAYS {
            rejections.push(Rejection {
                participant_id: rec.participant_id.clone(),
                date: rec.date,
                reason: RejectionReason::InsufficientValidDays,
                detail: format!(
                    "{} valid day(s) in window {lo}..={}, need at least {MIN_VALID_DAYS}",
                    valid_days.len(),
                    rec.date - chrono::Duration::days(1)
                ),
            });
            continue;
        }
        let days: Vec<DayGrid> =
            valid_days.iter().map(|d| interpolate_day(d)).collect::<Result<_>>()?;
        let mut sequence = Vec::with_capacity(HOURS_PER_DAY * days.len());
        for day in &days {
            sequence.extend(day.values().expect("interpolated day fully populated"));
        }
        let interval = NbdcInterval {
            participant_id: rec.participant_id.clone(),
            phq8: rec.clone(),
            days,
            sequence,
        };
        debug_assert!(interval.check_invariants().is_ok());
        intervals.push(interval);
    }

    intervals.sort_by(|a, b| {
        (a.participant_id.as_str(), a.phq8.date).cmp(&(b.participant_id.as_str(), b.phq8.date))
    });
    rejections.sort_by(|a, b| {
        (a.participant_id.as_str(), a.date, a.reason.as_str())
            .cmp(&(b.participant_id.as_str(), b.date, b.reason.as_str()))
    });
    Ok((intervals, rejections))
}

/// Weekday helper used by the synthetic generator and summaries.
pub fn is_weekend(date: NaiveDate) -> bool {
    matches!(date.weekday(), chrono::Weekday::Sat | chrono::Weekday::Sun)
}
