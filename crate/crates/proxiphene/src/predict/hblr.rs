//! Hierarchical Bayesian linear regression, fit by Gibbs sampling.
//!
//! Model, on standardized predictors z:
//!
//! ```text
//! y_ij = alpha_j + theta' z_ij + eps_ij    eps ~ N(0, sigma2)
//! alpha_j ~ N(mu_alpha, tau2)
//! theta_k ~ N(0, theta_sd^2)    mu_alpha ~ N(m0, mu_alpha_sd^2)
//! tau2 ~ InvGamma(1, 1)         sigma2 ~ InvGamma(1, 1)
//! ```
//!
//! Every conditional is conjugate, so the sampler is exact Gibbs: no
//! tuning, no acceptance rates. Coefficients are drawn jointly with the
//! intercepts marginalized out (then the intercepts refreshed), because
//! predictors that are constant within a participant mix hopelessly when
//! conditioned on that participant's intercept. Chains run in parallel from
//! per-chain derived seeds; convergence is judged by split R-hat on every
//! scalar parameter and reported, never silently ignored.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predict::design::{PredictionDesign, Standardizer};
use crate::seed::derived_rng;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};

/// Conjugate prior settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Priors {
    /// SD of each standardized coefficient's normal prior.
    pub theta_sd: f64,
    /// Prior mean for the population intercept; `None` uses the training
    /// target mean.
    pub mu_alpha_mean: Option<f64>,
    pub mu_alpha_sd: f64,
    /// Inverse-gamma shape/rate for the intercept variance.
    pub tau2_shape: f64,
    pub tau2_rate: f64,
    /// Inverse-gamma shape/rate for the residual variance.
    pub sigma2_shape: f64,
    pub sigma2_rate: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            theta_sd: 5.0,
            mu_alpha_mean: None,
            mu_alpha_sd: 10.0,
            tau2_shape: 1.0,
            tau2_rate: 1.0,
            sigma2_shape: 1.0,
            sigma2_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    /// Total draws per chain, burn-in included.
    pub draws_per_chain: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub rhat_threshold: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            draws_per_chain: 2000,
            burn_in: 1000,
            seed: 0,
            rhat_threshold: 1.05,
        }
    }
}

/// Post-burn-in draws, all chains concatenated in chain order, unthinned.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub predictor_names: Vec<String>,
    /// Training participants in design order; indexes the alpha columns.
    pub participants: Vec<String>,
    /// draws x p standardized coefficients.
    pub theta: Vec<Vec<f64>>,
    /// draws x J participant intercepts.
    pub alpha: Vec<Vec<f64>>,
    pub mu_alpha: Vec<f64>,
    pub tau2: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// Chain index per draw.
    pub chain_of: Vec<usize>,
    /// Split R-hat per monitored parameter.
    pub r_hat: BTreeMap<String, f64>,
    /// All R-hat values below the configured threshold.
    pub converged: bool,
    pub standardizer: Standardizer,
    pub seed: u64,
}

impl PosteriorSamples {
    pub fn n_draws(&self) -> usize {
        self.mu_alpha.len()
    }

    pub fn max_r_hat(&self) -> f64 {
        self.r_hat.values().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Fixed quantities shared by every scan.
struct GibbsData {
    z: Vec<Vec<f64>>,
    y: Vec<f64>,
    group_of: Vec<usize>,
    group_sizes: Vec<usize>,
    ztz: DMatrix<f64>,
    /// Per-group predictor sums, for the marginalized coefficient update.
    group_zsum: Vec<DVector<f64>>,
    n: usize,
    p: usize,
    j: usize,
    m0: f64,
}

fn group_zsums(z: &[Vec<f64>], group_of: &[usize], p: usize, j: usize) -> Vec<DVector<f64>> {
    let mut sums = vec![DVector::zeros(p); j];
    for (zi, &g) in z.iter().zip(group_of) {
        for k in 0..p {
            sums[g][k] += zi[k];
        }
    }
    sums
}

#[derive(Clone)]
struct GibbsState {
    theta: DVector<f64>,
    alpha: Vec<f64>,
    mu_alpha: f64,
    tau2: f64,
    sigma2: f64,
}

fn draw_inv_gamma<R: Rng>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).expect("valid gamma parameters");
    (1.0 / g.sample(rng)).max(1e-300)
}

/// Solves L' x = b for lower-triangular L by back substitution.
fn solve_lt_transpose(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let p = b.len();
    let mut x = DVector::zeros(p);
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in (i + 1)..p {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// One full Gibbs scan over theta, alpha, mu_alpha, tau2, sigma2.
fn gibbs_scan<R: Rng>(
    state: &mut GibbsState,
    data: &GibbsData,
    priors: &Priors,
    rng: &mut R,
) -> Result<()> {
    let (n, p, j) = (data.n, data.p, data.j);

    // theta | mu_alpha, tau2, sigma2, with alpha marginalized out: GLS
    // against the compound-symmetry covariance sigma2 I + tau2 11' per
    // group, whose inverse subtracts c_g S_g S_g' terms exactly as in a
    // profiled mixed model. Drawing theta without conditioning on alpha
    // (then refreshing alpha below) is what keeps between-participant
    // predictors mixing; conditioned on alpha they barely move.
    if p > 0 {
        let inv_s2 = 1.0 / state.sigma2;
        let lambda = state.tau2 * inv_s2;
        let mut a = data.ztz.clone();
        let mut b = DVector::zeros(p);
        let mut resid_group = vec![0.0f64; j];
        for i in 0..n {
            let r = data.y[i] - state.mu_alpha;
            resid_group[data.group_of[i]] += r;
            for k in 0..p {
                b[k] += data.z[i][k] * r;
            }
        }
        for g in 0..j {
            let c = lambda / (1.0 + lambda * data.group_sizes[g] as f64);
            let s = &data.group_zsum[g];
            for row in 0..p {
                let cs = c * s[row];
                for col in 0..p {
                    a[(row, col)] -= cs * s[col];
                }
                b[row] -= cs * resid_group[g];
            }
        }
        a *= inv_s2;
        b *= inv_s2;
        let prior_prec = 1.0 / (priors.theta_sd * priors.theta_sd);
        for k in 0..p {
            a[(k, k)] += prior_prec;
        }
        let chol = Cholesky::new(a)
            .ok_or_else(|| Error::numerical("fit_hblr", "coefficient precision not positive definite"))?;
        let mean = chol.solve(&b);
        let eta = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        state.theta = mean + solve_lt_transpose(chol.l_dirty(), &eta);
    }

    // Row-wise fitted fixed part, reused by the remaining updates.
    let mut fixed = vec![0.0f64; n];
    if p > 0 {
        for i in 0..n {
            let mut f = 0.0;
            for k in 0..p {
                f += data.z[i][k] * state.theta[k];
            }
            fixed[i] = f;
        }
    }

    // alpha_j | rest.
    let mut resid_sums = vec![0.0f64; j];
    for i in 0..n {
        resid_sums[data.group_of[i]] += data.y[i] - fixed[i];
    }
    let inv_s2 = 1.0 / state.sigma2;
    let inv_t2 = 1.0 / state.tau2;
    for g in 0..j {
        let prec = data.group_sizes[g] as f64 * inv_s2 + inv_t2;
        let mean = (resid_sums[g] * inv_s2 + state.mu_alpha * inv_t2) / prec;
        let sd = (1.0 / prec).sqrt();
        state.alpha[g] = mean + sd * rng.sample::<f64, _>(StandardNormal);
    }

    // mu_alpha | rest.
    let prior_prec = 1.0 / (priors.mu_alpha_sd * priors.mu_alpha_sd);
    let prec = j as f64 * inv_t2 + prior_prec;
    let mean = (state.alpha.iter().sum::<f64>() * inv_t2 + data.m0 * prior_prec) / prec;
    state.mu_alpha = mean + (1.0 / prec).sqrt() * rng.sample::<f64, _>(StandardNormal);

    // tau2 | rest.
    let ss_alpha: f64 = state.alpha.iter().map(|a| (a - state.mu_alpha) * (a - state.mu_alpha)).sum();
    state.tau2 = draw_inv_gamma(priors.tau2_shape + j as f64 / 2.0, priors.tau2_rate + ss_alpha / 2.0, rng);

    // sigma2 | rest.
    let mut rss = 0.0;
    for i in 0..n {
        let r = data.y[i] - state.alpha[data.group_of[i]] - fixed[i];
        rss += r * r;
    }
    state.sigma2 =
        draw_inv_gamma(priors.sigma2_shape + n as f64 / 2.0, priors.sigma2_rate + rss / 2.0, rng);
    Ok(())
}

fn initial_state<R: Rng>(data: &GibbsData, rng: &mut R) -> GibbsState {
    let ybar = data.y.iter().sum::<f64>() / data.n as f64;
    let var_y = data.y.iter().map(|y| (y - ybar) * (y - ybar)).sum::<f64>() / data.n as f64;
    let mut group_means = vec![0.0f64; data.j];
    for (i, &g) in data.group_of.iter().enumerate() {
        group_means[g] += data.y[i];
    }
    for (m, &s) in group_means.iter_mut().zip(&data.group_sizes) {
        *m /= s as f64;
    }
    // Overdispersed starts: each chain jitters around data-driven values.
    let normal = Normal::new(0.0, 1.0).unwrap();
    GibbsState {
        theta: DVector::from_fn(data.p, |_, _| 0.1 * normal.sample(rng)),
        alpha: group_means.iter().map(|m| m + 0.5 * normal.sample(rng)).collect(),
        mu_alpha: ybar + normal.sample(rng),
        tau2: rng.random_range(0.1..2.0),
        sigma2: (var_y.max(0.25)) * rng.random_range(0.5..2.0),
    }
}

struct ChainDraws {
    theta: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    mu_alpha: Vec<f64>,
    tau2: Vec<f64>,
    sigma2: Vec<f64>,
}

fn run_chain(
    chain: usize,
    data: &GibbsData,
    priors: &Priors,
    config: &SamplerConfig,
) -> Result<ChainDraws> {
    let mut rng = derived_rng(config.seed, &format!("hblr/chain/{chain}"));
    let mut state = initial_state(data, &mut rng);
    let kept = config.draws_per_chain - config.burn_in;
    let mut out = ChainDraws {
        theta: Vec::with_capacity(kept),
        alpha: Vec::with_capacity(kept),
        mu_alpha: Vec::with_capacity(kept),
        tau2: Vec::with_capacity(kept),
        sigma2: Vec::with_capacity(kept),
    };
    for draw in 0..config.draws_per_chain {
        gibbs_scan(&mut state, data, priors, &mut rng)?;
        if draw >= config.burn_in {
            out.theta.push(state.theta.iter().cloned().collect());
            out.alpha.push(state.alpha.clone());
            out.mu_alpha.push(state.mu_alpha);
            out.tau2.push(state.tau2);
            out.sigma2.push(state.sigma2);
        }
    }
    Ok(out)
}

/// Split R-hat over a parameter's draws, grouped by chain and split in half.
fn split_r_hat(values: &[f64], chain_of: &[usize], n_chains: usize) -> f64 {
    let mut per_chain: Vec<Vec<f64>> = vec![Vec::new(); n_chains];
    for (v, &c) in values.iter().zip(chain_of) {
        per_chain[c].push(*v);
    }
    let mut segments: Vec<&[f64]> = Vec::new();
    let half = per_chain[0].len() / 2;
    for c in &per_chain {
        segments.push(&c[..half]);
        segments.push(&c[half..half * 2]);
    }
    let l = half as f64;
    let means: Vec<f64> = segments.iter().map(|s| s.iter().sum::<f64>() / l).collect();
    let vars: Vec<f64> = segments
        .iter()
        .zip(&means)
        .map(|(s, m)| s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (l - 1.0))
        .collect();
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let b = l * means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
        / (means.len() as f64 - 1.0);
    let w = vars.iter().sum::<f64>() / vars.len() as f64;
    if w <= 1e-300 {
        // Degenerate chains: identical draws everywhere count as converged.
        return if b <= 1e-300 { 1.0 } else { f64::INFINITY };
    }
    (((l - 1.0) / l * w + b / l) / w).sqrt()
}

/// Fits the hierarchy on a training design.
///
/// Predictors are standardized with training statistics (frozen into the
/// returned posterior); targets stay on their native scale. Non-convergence
/// flips `converged` off rather than erroring, so callers can surface it.
pub fn fit_hblr(
    train: &PredictionDesign,
    priors: &Priors,
    config: &SamplerConfig,
) -> Result<PosteriorSamples> {
    if train.is_empty() {
        return Err(Error::invalid_argument("empty training design"));
    }
    if config.chains == 0 || config.draws_per_chain <= config.burn_in {
        return Err(Error::invalid_argument("need chains >= 1 and draws > burn-in"));
    }
    if config.draws_per_chain - config.burn_in < 4 {
        return Err(Error::invalid_argument("need at least 4 kept draws per chain"));
    }
    let participants = train.participants();
    let index_of: BTreeMap<&str, usize> =
        participants.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();

    let raw = train.predictor_matrix();
    let standardizer = Standardizer::fit(&raw)?;
    let z = standardizer.transform(&raw);
    let y = train.targets();
    let n = y.len();
    let p = train.n_predictors();
    let j = participants.len();
    let group_of: Vec<usize> =
        train.rows.iter().map(|r| index_of[r.participant_id.as_str()]).collect();
    let mut group_sizes = vec![0usize; j];
    for &g in &group_of {
        group_sizes[g] += 1;
    }
    let mut ztz = DMatrix::zeros(p, p);
    for zi in &z {
        for r in 0..p {
            for c in r..p {
                ztz[(r, c)] += zi[r] * zi[c];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            ztz[(r, c)] = ztz[(c, r)];
        }
    }
    let ybar = y.iter().sum::<f64>() / n as f64;
    let group_zsum = group_zsums(&z, &group_of, p, j);
    let data = GibbsData {
        z,
        y,
        group_of,
        group_sizes,
        ztz,
        group_zsum,
        n,
        p,
        j,
        m0: priors.mu_alpha_mean.unwrap_or(ybar),
    };

    let chains: Vec<ChainDraws> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(c, &data, priors, config))
        .collect::<Result<_>>()?;

    let kept = config.draws_per_chain - config.burn_in;
    let total = kept * config.chains;
    let mut posterior = PosteriorSamples {
        predictor_names: train.predictor_names(),
        participants,
        theta: Vec::with_capacity(total),
        alpha: Vec::with_capacity(total),
        mu_alpha: Vec::with_capacity(total),
        tau2: Vec::with_capacity(total),
        sigma2: Vec::with_capacity(total),
        chain_of: Vec::with_capacity(total),
        r_hat: BTreeMap::new(),
        converged: false,
        standardizer,
        seed: config.seed,
    };
    for (c, chain) in chains.into_iter().enumerate() {
        posterior.chain_of.extend(std::iter::repeat(c).take(kept));
        posterior.theta.extend(chain.theta);
        posterior.alpha.extend(chain.alpha);
        posterior.mu_alpha.extend(chain.mu_alpha);
        posterior.tau2.extend(chain.tau2);
        posterior.sigma2.extend(chain.sigma2);
    }

    let scalar = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..total).map(f).collect() };
    let mut r_hat = BTreeMap::new();
    for (k, name) in posterior.predictor_names.iter().enumerate() {
        let vals = scalar(&|d| posterior.theta[d][k]);
        r_hat.insert(format!("theta[{name}]"), split_r_hat(&vals, &posterior.chain_of, config.chains));
    }
    for (g, pid) in posterior.participants.iter().enumerate() {
        let vals = scalar(&|d| posterior.alpha[d][g]);
        r_hat.insert(format!("alpha[{pid}]"), split_r_hat(&vals, &posterior.chain_of, config.chains));
    }
    r_hat.insert("mu_alpha".into(), split_r_hat(&posterior.mu_alpha, &posterior.chain_of, config.chains));
    r_hat.insert("tau2".into(), split_r_hat(&posterior.tau2, &posterior.chain_of, config.chains));
    r_hat.insert("sigma2".into(), split_r_hat(&posterior.sigma2, &posterior.chain_of, config.chains));
    posterior.converged = r_hat.values().all(|v| *v < config.rhat_threshold);
    posterior.r_hat = r_hat;
    Ok(posterior)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PredictOptions {
    /// Clamp point predictions and interval ends to the 0-24 score range.
    pub clip: bool,
}

#[derive(Debug, Clone)]
pub struct HblrPrediction {
    /// Posterior-mean prediction per test row.
    pub mean: Vec<f64>,
    /// Central 90% interval over the per-draw mean structure.
    pub lower90: Vec<f64>,
    pub upper90: Vec<f64>,
}

/// Type-7 linear-interpolation quantile of a sorted slice.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Posterior-mean predictions with 90% intervals.
///
/// Participants present in training use their own intercept draws; unseen
/// participants get an intercept drawn from N(mu_alpha, tau2) per draw,
/// seeded deterministically from the posterior seed and the participant id.
pub fn predict_hblr(
    posterior: &PosteriorSamples,
    test: &PredictionDesign,
    options: &PredictOptions,
) -> Result<HblrPrediction> {
    if test.predictor_names() != posterior.predictor_names {
        return Err(Error::ModelMismatch(format!(
            "test design has predictors {:?}, posterior was fit on {:?}",
            test.predictor_names(),
            posterior.predictor_names
        )));
    }
    let d = posterior.n_draws();
    if d == 0 {
        return Err(Error::invalid_argument("posterior has no draws"));
    }
    let index_of: BTreeMap<&str, usize> =
        posterior.participants.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();

    // One intercept stream per unseen participant, shared by its rows.
    let mut unseen: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in &test.rows {
        let pid = row.participant_id.as_str();
        if !index_of.contains_key(pid) && !unseen.contains_key(pid) {
            let mut rng = derived_rng(posterior.seed, &format!("hblr/predict/{pid}"));
            let draws: Vec<f64> = (0..d)
                .map(|t| {
                    posterior.mu_alpha[t]
                        + posterior.tau2[t].sqrt() * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            unseen.insert(pid, draws);
        }
    }

    let n = test.len();
    let mut mean = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut per_draw = vec![0.0f64; d];
    for (i, row) in test.rows.iter().enumerate() {
        let zi = posterior.standardizer.transform_row(&test.predictor_row(i));
        let pid = row.participant_id.as_str();
        for t in 0..d {
            let a = match index_of.get(pid) {
                Some(&g) => posterior.alpha[t][g],
                None => unseen[pid][t],
            };
            let mut f = a;
            for (k, z) in zi.iter().enumerate() {
                f += posterior.theta[t][k] * z;
            }
            per_draw[t] = f;
        }
        let m = per_draw.iter().sum::<f64>() / d as f64;
        let mut sorted = per_draw.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (mut lo, mut hi) = (quantile_sorted(&sorted, 0.05), quantile_sorted(&sorted, 0.95));
        let mut point = m;
        if options.clip {
            point = point.clamp(0.0, 24.0);
            lo = lo.clamp(0.0, 24.0);
            hi = hi.clamp(0.0, 24.0);
        }
        mean.push(point);
        lower.push(lo);
        upper.push(hi);
    }
    Ok(HblrPrediction { mean, lower90: lower, upper90: upper })
}
