//! The 16 second-order statistical features.
//!
//! Each valid day yields four first-order statistics of its 24 hourly values
//! (max, min, mean, sample std). Applying the same four statistics across the
//! interval's days gives the 16 features, keyed `<across-days>_<daily>`: the
//! mean of daily maxima is `Mean_Max`.

use crate::ingest::NbdcInterval;

/// First-order statistics of one populated day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyStats {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub std: f64,
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator); 0 for fewer than 2 values.
pub(crate) fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Max/min/mean/sample-std of one day's 24 hourly values.
pub fn daily_stats(values: &[f64; 24]) -> DailyStats {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    DailyStats { max, min, mean: mean(values), std: sample_std(values) }
}

/// The across-day statistics, in key order `Max, Min, Mean, Std`.
fn across(xs: &[f64]) -> [f64; 4] {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    [max, min, mean(xs), sample_std(xs)]
}

/// Names of the 16 features in emission order.
pub const STAT_FEATURE_NAMES: [&str; 16] = [
    "Max_Max", "Max_Min", "Max_Mean", "Max_Std",
    "Min_Max", "Min_Min", "Min_Mean", "Min_Std",
    "Mean_Max", "Mean_Min", "Mean_Mean", "Mean_Std",
    "Std_Max", "Std_Min", "Std_Mean", "Std_Std",
];

/// The 16 second-order features of an interval, ordered per
/// [`STAT_FEATURE_NAMES`]. Day order does not matter.
pub fn second_order_features(interval: &NbdcInterval) -> [f64; 16] {
    let daily: Vec<DailyStats> = interval
        .days
        .iter()
        .map(|day| daily_stats(&day.values().expect("interval days are fully populated")))
        .collect();
    let series: [Vec<f64>; 4] = [
        daily.iter().map(|s| s.max).collect(),
        daily.iter().map(|s| s.min).collect(),
        daily.iter().map(|s| s.mean).collect(),
        daily.iter().map(|s| s.std).collect(),
    ];
    let mut out = [0.0; 16];
    for (daily_idx, s) in series.iter().enumerate() {
        let col = across(s);
        for (across_idx, v) in col.iter().enumerate() {
            out[across_idx * 4 + daily_idx] = *v;
        }
    }
    out
}
