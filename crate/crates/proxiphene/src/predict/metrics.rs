//! Pooled R-squared and RMSE.

use serde::{Deserialize, Serialize};

use crate::cv::Scheme;
use crate::error::{Error, Result};

/// Pooled metrics for one (model, scheme) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scheme: Scheme,
    pub model: String,
    /// 1 - SSR/SST with test-mean centering; may be negative; `None` when
    /// the pooled test targets have zero variance.
    pub r2: Option<f64>,
    pub rmse: f64,
    pub n_test: usize,
}

/// Pools (prediction, target) pairs into one R-squared/RMSE pair.
pub fn evaluate(
    predictions: &[f64],
    targets: &[f64],
    scheme: Scheme,
    model: &str,
) -> Result<MetricsReport> {
    if predictions.len() != targets.len() {
        return Err(Error::invalid_argument(format!(
            "{} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::invalid_argument("evaluate needs at least one pair"));
    }
    if predictions.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::invalid_argument("non-finite prediction or target"));
    }
    let mean = targets.iter().sum::<f64>() / n as f64;
    let mut ssr = 0.0;
    let mut sst = 0.0;
    for (p, y) in predictions.iter().zip(targets) {
        ssr += (y - p) * (y - p);
        sst += (y - mean) * (y - mean);
    }
    let rmse = (ssr / n as f64).sqrt();
    let r2 = if sst > 0.0 { Some(1.0 - ssr / sst) } else { None };
    Ok(MetricsReport { scheme, model: model.to_string(), r2, rmse, n_test: n })
}
