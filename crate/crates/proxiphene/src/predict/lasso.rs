//! LASSO regression by cyclic coordinate descent.
//!
//! Objective: `(1/2n) sum (y_i - b0 - z_i' b)^2 + lambda * sum |b_j|` with an
//! unpenalized intercept. Predictors are expected standardized; the wrapper
//! `fit_lasso_cv` freezes a training standardizer and picks lambda by
//! participant-grouped internal cross-validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predict::design::{PredictionDesign, Standardizer};
use crate::seed::derived_rng;
use rand::seq::SliceRandom;

const MAX_SWEEPS: usize = 100_000;
const TOL: f64 = 1e-8;
/// Relative objective-plateau tolerance. With nearly collinear columns the
/// minimizer is a flat face and coefficients can slide along it forever at
/// steps above `TOL`; the fitted values on that face are unique, so a sweep
/// that no longer lowers the objective means the solve is done.
const OBJ_TOL: f64 = 1e-12;
/// After this many sweeps the solve falls back to the coordinate-wise
/// stopping rule used by glmnet: largest weighted squared move in a sweep
/// below `FALLBACK_TOL` times the response variance. Ten times tighter than
/// glmnet's default threshold, and consulted only once the tight rules have
/// had a generous budget, so well-conditioned solves are unaffected.
const FALLBACK_SWEEPS: usize = 1_000;
const FALLBACK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub n_sweeps: usize,
    /// Final value of the penalized objective.
    pub objective: f64,
    /// False when the sweep cap was reached first. The returned iterate is
    /// still the best seen, since the objective never increases.
    pub converged: bool,
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn objective_value(residuals: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = residuals.len() as f64;
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    rss / (2.0 * n) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Smallest penalty at which every coefficient is zero.
pub fn lambda_max(z: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len();
    if n == 0 || z[0].is_empty() {
        return 0.0;
    }
    let ybar = y.iter().sum::<f64>() / n as f64;
    let p = z[0].len();
    let mut best = 0.0f64;
    for j in 0..p {
        let mut dot = 0.0;
        for i in 0..n {
            dot += z[i][j] * (y[i] - ybar);
        }
        best = best.max((dot / n as f64).abs());
    }
    best
}

/// Coordinate-descent solve at a fixed penalty, warm-started from `start`.
///
/// Converges when no coefficient (intercept included) moves more than 1e-8
/// in a sweep, when a full sweep stops lowering the objective (see
/// [`OBJ_TOL`]), or, after [`FALLBACK_SWEEPS`], under the looser glmnet-style
/// rule. Severely ill-conditioned corners that satisfy none of these within
/// [`MAX_SWEEPS`] return the final iterate with `converged: false` rather
/// than an error; the objective is monotone, so that iterate is the best
/// seen. The objective is asserted non-increasing across sweeps; a violation
/// is a solver bug, not a data property.
pub fn fit_lasso_from(
    z: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    start: Option<&LassoFit>,
) -> Result<LassoFit> {
    let n = y.len();
    if n == 0 || z.len() != n {
        return Err(Error::invalid_argument("lasso needs matching, non-empty z and y"));
    }
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::invalid_argument(format!("penalty {lambda} must be >= 0")));
    }
    let p = z[0].len();
    if z.iter().any(|r| r.len() != p) {
        return Err(Error::invalid_argument("ragged predictor matrix"));
    }

    // Per-column mean squares; a zero column never activates.
    let col_ms: Vec<f64> =
        (0..p).map(|j| z.iter().map(|r| r[j] * r[j]).sum::<f64>() / n as f64).collect();

    let mut beta = vec![0.0f64; p];
    let mut intercept = 0.0f64;
    if let Some(s) = start {
        if s.coefficients.len() == p {
            beta.copy_from_slice(&s.coefficients);
            intercept = s.intercept;
        }
    }
    let mut residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - intercept - (0..p).map(|j| z[i][j] * beta[j]).sum::<f64>())
        .collect();

    // Response variance scales the fallback rule, matching glmnet's
    // standardized-response convention.
    let ybar = y.iter().sum::<f64>() / n as f64;
    let vy =
        (y.iter().map(|v| (v - ybar) * (v - ybar)).sum::<f64>() / n as f64).max(f64::EPSILON);

    let mut last_objective = objective_value(&residuals, &beta, lambda);
    let mut sweeps = 0;
    let mut converged = true;
    loop {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            sweeps = MAX_SWEEPS;
            converged = false;
            break;
        }
        let mut max_delta = 0.0f64;
        // Largest mean-square-weighted squared move this sweep (glmnet's dlx).
        let mut max_weighted_sq = 0.0f64;

        // Intercept: unpenalized mean of the partial residuals.
        let shift = residuals.iter().sum::<f64>() / n as f64;
        intercept += shift;
        for r in residuals.iter_mut() {
            *r -= shift;
        }
        max_delta = max_delta.max(shift.abs());
        max_weighted_sq = max_weighted_sq.max(shift * shift);

        for j in 0..p {
            if col_ms[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let mut rho = 0.0;
            for i in 0..n {
                rho += z[i][j] * (residuals[i] + z[i][j] * old);
            }
            rho /= n as f64;
            let new = soft_threshold(rho, lambda) / col_ms[j];
            if new != old {
                let delta = new - old;
                for i in 0..n {
                    residuals[i] -= z[i][j] * delta;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
                max_weighted_sq = max_weighted_sq.max(col_ms[j] * delta * delta);
            }
        }

        let obj = objective_value(&residuals, &beta, lambda);
        assert!(
            obj <= last_objective + 1e-10,
            "coordinate descent increased the objective: {last_objective} -> {obj}"
        );
        let decrease = last_objective - obj;
        last_objective = obj;
        let plateaued = decrease <= OBJ_TOL * (1.0 + obj.abs());
        let fallback = sweeps > FALLBACK_SWEEPS && max_weighted_sq < FALLBACK_TOL * vy;
        if max_delta < TOL || plateaued || fallback {
            break;
        }
    }
    Ok(LassoFit {
        intercept,
        coefficients: beta,
        lambda,
        n_sweeps: sweeps,
        objective: last_objective,
        converged,
    })
}

/// Cold-started solve at a fixed penalty.
pub fn fit_lasso(z: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LassoFit> {
    fit_lasso_from(z, y, lambda, None)
}

/// Log-spaced penalty grid from `lambda_max` down `decades` orders of
/// magnitude.
pub fn lambda_grid(lmax: f64, len: usize, decades: f64) -> Vec<f64> {
    let lmax = if lmax > 0.0 { lmax } else { 1.0 };
    (0..len).map(|i| lmax * 10f64.powf(-decades * i as f64 / (len - 1) as f64)).collect()
}

/// A penalty's mean CV score across internal folds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaScore {
    pub lambda: f64,
    pub mean_squared_error: f64,
}

/// Fitted LASSO with its frozen standardization and selection trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoModel {
    pub standardizer: Standardizer,
    pub fit: LassoFit,
    pub cv_curve: Vec<LambdaScore>,
}

impl LassoModel {
    pub fn predict_design(&self, design: &PredictionDesign) -> Vec<f64> {
        (0..design.len())
            .map(|i| {
                let zi = self.standardizer.transform_row(&design.predictor_row(i));
                self.fit.intercept
                    + zi.iter().zip(&self.fit.coefficients).map(|(z, b)| z * b).sum::<f64>()
            })
            .collect()
    }
}

/// Standardizes the training design, picks the penalty by 5-fold
/// participant-grouped cross-validation over a 50-value log grid, and
/// refits on the full training set at the winner.
///
/// Fold assignment shuffles participants with a seed-derived stream, so the
/// selection is deterministic per seed. Ties on CV error prefer the larger
/// (sparser) penalty.
pub fn fit_lasso_cv(train: &PredictionDesign, seed: u64) -> Result<LassoModel> {
    if train.is_empty() {
        return Err(Error::invalid_argument("empty training design"));
    }
    let raw = train.predictor_matrix();
    let standardizer = Standardizer::fit(&raw)?;
    let z = standardizer.transform(&raw);
    let y = train.targets();

    let participants = train.participants();
    let n_folds = participants.len().min(5).max(2).min(train.len());
    let mut shuffled = participants.clone();
    let mut rng = derived_rng(seed, "lasso/fold-assignment");
    shuffled.shuffle(&mut rng);
    let fold_of_participant: std::collections::BTreeMap<&str, usize> = shuffled
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i % n_folds))
        .collect();
    // Grouped folds when there are enough participants; plain row folds
    // otherwise (tiny fixtures only).
    let fold_of_row: Vec<usize> = if participants.len() >= 2 {
        train.rows.iter().map(|r| fold_of_participant[r.participant_id.as_str()]).collect()
    } else {
        (0..train.len()).map(|i| i % n_folds).collect()
    };

    // Grid depth follows the usual n-vs-p convention: a shallower floor in
    // the underdetermined regime, where tiny penalties are ill-conditioned.
    let n_predictors = train.n_predictors();
    let decades = if train.len() < n_predictors { 2.0 } else { 4.0 };
    let grid = lambda_grid(lambda_max(&z, &y), 50, decades);
    let mut sse_per_lambda = vec![0.0f64; grid.len()];
    let mut count_per_lambda = vec![0usize; grid.len()];
    for fold in 0..n_folds {
        let mut z_train = Vec::new();
        let mut y_train = Vec::new();
        let mut z_test = Vec::new();
        let mut y_test = Vec::new();
        for i in 0..train.len() {
            if fold_of_row[i] == fold {
                z_test.push(z[i].clone());
                y_test.push(y[i]);
            } else {
                z_train.push(z[i].clone());
                y_train.push(y[i]);
            }
        }
        if z_train.is_empty() || z_test.is_empty() {
            continue;
        }
        let mut warm: Option<LassoFit> = None;
        for (g, &lambda) in grid.iter().enumerate() {
            let fit = fit_lasso_from(&z_train, &y_train, lambda, warm.as_ref())?;
            for (zi, yi) in z_test.iter().zip(&y_test) {
                let pred = fit.intercept
                    + zi.iter().zip(&fit.coefficients).map(|(z, b)| z * b).sum::<f64>();
                sse_per_lambda[g] += (yi - pred) * (yi - pred);
                count_per_lambda[g] += 1;
            }
            warm = Some(fit);
        }
    }

    let cv_curve: Vec<LambdaScore> = grid
        .iter()
        .zip(sse_per_lambda.iter().zip(&count_per_lambda))
        .map(|(l, (sse, c))| LambdaScore {
            lambda: *l,
            mean_squared_error: if *c > 0 { sse / *c as f64 } else { f64::INFINITY },
        })
        .collect();
    // Grid runs large to small; <= keeps the first (larger) lambda on ties.
    let best = cv_curve
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.mean_squared_error.partial_cmp(&b.mean_squared_error).unwrap()
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::numerical("fit_lasso_cv", "empty penalty grid"))?;

    let fit = fit_lasso(&z, &y, grid[best])?;
    Ok(LassoModel { standardizer, fit, cv_curve })
}
