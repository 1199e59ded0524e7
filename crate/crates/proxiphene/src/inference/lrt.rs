//! Likelihood-ratio tests between nested random-intercept models.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::inference::lmm::LmmFit;

/// Result of one nested comparison.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LrtResult {
    pub full_model: String,
    pub reduced_model: String,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Upper critical value at alpha = 0.05 for the test's df.
    pub critical_value: f64,
    pub log_likelihood_full: f64,
    pub log_likelihood_reduced: f64,
}

/// Chi-squared survival function P(X > x).
pub fn chi2_sf(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::invalid_argument("chi-squared sf needs df >= 1"));
    }
    let d = ChiSquared::new(df as f64)
        .map_err(|e| Error::numerical("chi2_sf", format!("df {df}: {e}")))?;
    Ok(d.sf(x.max(0.0)))
}

/// Upper quantile: the x with P(X > x) = alpha.
pub fn chi2_critical(alpha: f64, df: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(Error::invalid_argument(format!("alpha {alpha} outside (0, 1)")));
    }
    if df == 0 {
        return Err(Error::invalid_argument("chi-squared quantile needs df >= 1"));
    }
    let d = ChiSquared::new(df as f64)
        .map_err(|e| Error::numerical("chi2_critical", format!("df {df}: {e}")))?;
    Ok(d.inverse_cdf(1.0 - alpha))
}

/// Compares a nested reduced ML fit against the full fit containing it.
///
/// Degrees of freedom come from the declared parameter counts, so a fit that
/// dropped aliased columns still tests the declared specification. A slightly
/// negative statistic (within 1e-6) is clamped to zero; anything more
/// negative indicates the models are not nested or an optimizer failure and
/// is an error. df = 0 (identical specifications) yields p = 1.
pub fn likelihood_ratio_test(
    reduced_name: &str,
    reduced: &LmmFit,
    full_name: &str,
    full: &LmmFit,
) -> Result<LrtResult> {
    if full.n_obs != reduced.n_obs {
        return Err(Error::ModelMismatch(format!(
            "models fit on different data: {} vs {} rows",
            full.n_obs, reduced.n_obs
        )));
    }
    if full.n_params < reduced.n_params {
        return Err(Error::ModelMismatch(format!(
            "full model ({} params) smaller than reduced ({})",
            full.n_params, reduced.n_params
        )));
    }
    let df = full.n_params - reduced.n_params;
    let mut statistic = 2.0 * (full.log_likelihood - reduced.log_likelihood);
    if statistic < 0.0 {
        if statistic > -1e-6 {
            statistic = 0.0;
        } else {
            return Err(Error::ModelMismatch(format!(
                "full model log-likelihood {:.6} below reduced {:.6}; models are not nested",
                full.log_likelihood, reduced.log_likelihood
            )));
        }
    }
    let (p_value, critical_value) = if df == 0 {
        (1.0, f64::NAN)
    } else {
        (chi2_sf(statistic, df)?, chi2_critical(0.05, df)?)
    };
    Ok(LrtResult {
        full_model: full_name.to_string(),
        reduced_model: reduced_name.to_string(),
        statistic,
        df,
        p_value,
        critical_value,
        log_likelihood_full: full.log_likelihood,
        log_likelihood_reduced: reduced.log_likelihood,
    })
}
