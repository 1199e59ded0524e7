//! Benjamini-Hochberg step-up adjustment.

use crate::error::{Error, Result};

/// Adjusted p-values in the original input order.
///
/// Step-up construction: sort ascending (stable), take `m * p / rank`, apply
/// the running suffix minimum, clip at 1. An empty input yields an empty
/// output; p-values outside [0, 1] or non-finite are rejected.
pub fn bh_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p_values.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0) {
        return Err(Error::invalid_argument(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p_values.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).unwrap());

    let mut adjusted = vec![0.0f64; m];
    let mut running = f64::INFINITY;
    for rank in (1..=m).rev() {
        let idx = order[rank - 1];
        let val = p_values[idx] * m as f64 / rank as f64;
        running = running.min(val);
        adjusted[idx] = running.min(1.0);
    }
    Ok(adjusted)
}
