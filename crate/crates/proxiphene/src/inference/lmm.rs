//! Random-intercept linear mixed model, fit by maximum likelihood.
//!
//! Model: `y_ij = x_ij' b + u_j + e_ij` with `u_j ~ N(0, tau2)` and
//! `e_ij ~ N(0, sigma2)`. Writing `lambda = tau2 / sigma2`, the marginal
//! covariance is `sigma2 * (I + lambda Z Z')`, block diagonal over groups,
//! and for a group of size `n_j`
//!
//! ```text
//! (I + lambda 1 1')^-1 = I - (lambda / (1 + lambda n_j)) 1 1'
//! ln det(I + lambda 1 1') = ln(1 + lambda n_j)
//! ```
//!
//! so beta and sigma2 profile out in closed form and the likelihood reduces
//! to a 1-D search over lambda (grid plus golden-section refinement). ML, not
//! REML, so likelihood-ratio tests across fixed-effect specifications are
//! valid. The boundary lambda = 0 is permitted and reported.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative residual-norm threshold below which a column counts as linearly
/// dependent on its predecessors.
const ALIAS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default)]
pub struct LmmOptions {
    /// Drop aliased (linearly dependent) columns, left to right, instead of
    /// erroring. Dropped columns get NaN estimates; declared parameter counts
    /// are unaffected.
    pub drop_aliased: bool,
}

/// A fitted random-intercept model.
#[derive(Debug, Clone)]
pub struct LmmFit {
    /// Declared fixed-effect names, in design-column order.
    pub names: Vec<String>,
    /// Per-unit estimates aligned with `names`; NaN for dropped columns.
    pub estimates: Vec<f64>,
    /// Standard errors from the information matrix at the optimum; NaN for
    /// dropped columns.
    pub std_errors: Vec<f64>,
    /// Indices of columns dropped as aliased (empty unless requested).
    pub dropped: Vec<usize>,
    /// Random-intercept variance (0 at the boundary).
    pub tau2: f64,
    /// Residual variance.
    pub sigma2: f64,
    /// Variance ratio tau2/sigma2 at the optimum.
    pub lambda: f64,
    /// Maximized marginal log-likelihood.
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub n_groups: usize,
    /// Declared fixed effects + 2 variance parameters.
    pub n_params: usize,
    /// True when the variance-ratio estimate sits at the lambda = 0 boundary.
    pub boundary: bool,
}

impl LmmFit {
    /// Estimate and standard error for a named column.
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.estimates[i], self.std_errors[i]))
    }
}

/// Per-group sufficient statistics shared by every profile evaluation.
struct ProfileContext {
    x: DMatrix<f64>,
    y: DVector<f64>,
    group_of: Vec<usize>,
    group_sizes: Vec<usize>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    /// Column sums of X per group.
    sx: Vec<DVector<f64>>,
    /// Sums of y per group.
    sy: Vec<f64>,
}

struct ProfilePoint {
    lambda: f64,
    log_likelihood: f64,
    beta: DVector<f64>,
    sigma2: f64,
    xtwx: DMatrix<f64>,
}

impl ProfileContext {
    fn new(x: DMatrix<f64>, y: DVector<f64>, group_of: Vec<usize>, n_groups: usize) -> Self {
        let p = x.ncols();
        let mut group_sizes = vec![0usize; n_groups];
        let mut sx = vec![DVector::zeros(p); n_groups];
        let mut sy = vec![0.0f64; n_groups];
        for (i, &g) in group_of.iter().enumerate() {
            group_sizes[g] += 1;
            for k in 0..p {
                sx[g][k] += x[(i, k)];
            }
            sy[g] += y[i];
        }
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &y;
        ProfileContext { x, y, group_of, group_sizes, xtx, xty, sx, sy }
    }

    /// Profile log-likelihood at a fixed variance ratio; None when the
    /// weighted normal equations are singular or degenerate.
    fn eval(&self, lambda: f64) -> Option<ProfilePoint> {
        let n = self.x.nrows();
        let p = self.x.ncols();
        let mut a = self.xtx.clone();
        let mut b = self.xty.clone();
        let shrink: Vec<f64> = self
            .group_sizes
            .iter()
            .map(|&nj| lambda / (1.0 + lambda * nj as f64))
            .collect();
        if lambda > 0.0 {
            for (j, c) in shrink.iter().enumerate() {
                let sxj = &self.sx[j];
                // a -= c * sxj sxj'
                for r in 0..p {
                    let cr = c * sxj[r];
                    for s in 0..p {
                        a[(r, s)] -= cr * sxj[s];
                    }
                    b[r] -= cr * self.sy[j];
                }
            }
        }
        let chol = Cholesky::new(a.clone())?;
        let beta = chol.solve(&b);

        let mut rss = 0.0f64;
        let mut sr = vec![0.0f64; self.group_sizes.len()];
        for i in 0..n {
            let mut fitted = 0.0;
            for k in 0..p {
                fitted += self.x[(i, k)] * beta[k];
            }
            let r = self.y[i] - fitted;
            rss += r * r;
            sr[self.group_of[i]] += r;
        }
        let mut rwr = rss;
        for (j, c) in shrink.iter().enumerate() {
            rwr -= c * sr[j] * sr[j];
        }
        let sigma2 = (rwr / n as f64).max(1e-300);
        let logdet: f64 = self
            .group_sizes
            .iter()
            .map(|&nj| (1.0 + lambda * nj as f64).ln())
            .sum();
        let nf = n as f64;
        let log_likelihood =
            -0.5 * (nf * ((2.0 * std::f64::consts::PI).ln() + 1.0) + nf * sigma2.ln() + logdet);
        log_likelihood.is_finite().then_some(ProfilePoint {
            lambda,
            log_likelihood,
            beta,
            sigma2,
            xtwx: a,
        })
    }
}

/// Flags columns of a (scaled) design that are linearly dependent on the
/// columns to their left, by modified Gram-Schmidt with re-orthogonalization.
fn detect_aliased(x: &DMatrix<f64>) -> Vec<bool> {
    let p = x.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut aliased = vec![false; p];
    for k in 0..p {
        let mut v = x.column(k).into_owned();
        let orig = v.norm();
        if orig == 0.0 {
            aliased[k] = true;
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let res = v.norm();
        if res <= ALIAS_TOL * orig {
            aliased[k] = true;
        } else {
            basis.push(v / res);
        }
    }
    aliased
}

/// Golden-section maximization of `f` on `[lo, hi]`, returning the best
/// point seen (including the bracket ends).
fn golden_max(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut best = (lo, f(lo));
    let fhi = f(hi);
    if fhi > best.1 {
        best = (hi, fhi);
    }
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INVPHI * (b - a);
    let mut x2 = a + INVPHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INVPHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INVPHI * (b - a);
            f2 = f(x2);
        }
        let (xc, fc) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        if fc > best.1 {
            best = (xc, fc);
        }
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs() + b.abs()) {
            break;
        }
    }
    best
}

/// Fits the random-intercept model by maximum likelihood.
///
/// `groups[i]` labels the group of row i; labels are arbitrary usize values.
/// Requires at least 2 distinct groups, a column-named design, and (unless
/// `drop_aliased`) full column rank.
pub fn fit_lmm(
    y: &[f64],
    x: &DMatrix<f64>,
    groups: &[usize],
    names: &[String],
    options: &LmmOptions,
) -> Result<LmmFit> {
    let n = y.len();
    let p_declared = x.ncols();
    if n == 0 || x.nrows() != n || groups.len() != n {
        return Err(Error::invalid_argument(format!(
            "inconsistent dimensions: y {n}, x {}x{}, groups {}",
            x.nrows(),
            x.ncols(),
            groups.len()
        )));
    }
    if names.len() != p_declared {
        return Err(Error::invalid_argument("one name per design column required"));
    }
    if p_declared == 0 {
        return Err(Error::invalid_argument("design has no columns"));
    }
    if !y.iter().all(|v| v.is_finite()) || !x.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid_argument("non-finite value in y or X"));
    }

    // Dense group codes in order of first appearance.
    let mut code_of = std::collections::BTreeMap::new();
    let mut group_of = Vec::with_capacity(n);
    for &g in groups {
        let next = code_of.len();
        let code = *code_of.entry(g).or_insert(next);
        group_of.push(code);
    }
    let n_groups = code_of.len();
    if n_groups < 2 {
        return Err(Error::invalid_argument("at least 2 groups required"));
    }

    // Column scaling to unit RMS for conditioning; exact back-transform below.
    let mut scales = vec![0.0f64; p_declared];
    for k in 0..p_declared {
        let ss: f64 = (0..n).map(|i| x[(i, k)] * x[(i, k)]).sum();
        let rms = (ss / n as f64).sqrt();
        scales[k] = if rms > 0.0 { rms } else { 1.0 };
    }
    let mut xs = x.clone();
    for k in 0..p_declared {
        for i in 0..n {
            xs[(i, k)] /= scales[k];
        }
    }

    let aliased = detect_aliased(&xs);
    let dropped: Vec<usize> =
        aliased.iter().enumerate().filter(|(_, a)| **a).map(|(k, _)| k).collect();
    if !dropped.is_empty() && !options.drop_aliased {
        let names: Vec<&str> = dropped.iter().map(|&k| names[k].as_str()).collect();
        return Err(Error::RankDeficient(format!(
            "column(s) linearly dependent on earlier columns: {}",
            names.join(", ")
        )));
    }
    let kept: Vec<usize> = (0..p_declared).filter(|k| !aliased[*k]).collect();
    if kept.is_empty() {
        return Err(Error::RankDeficient("all design columns are aliased or zero".into()));
    }
    let xk = DMatrix::from_fn(n, kept.len(), |i, c| xs[(i, kept[c])]);

    let ctx = ProfileContext::new(xk, DVector::from_column_slice(y), group_of, n_groups);

    // Coarse grid over the variance ratio: 0 plus 65 log-spaced points
    // spanning 1e-8..1e8.
    let mut grid = vec![0.0f64];
    for i in 0..65 {
        grid.push(10f64.powf(-8.0 + 16.0 * i as f64 / 64.0));
    }
    let mut evals: Vec<Option<f64>> = Vec::with_capacity(grid.len());
    let mut best_idx = None::<usize>;
    for (i, &l) in grid.iter().enumerate() {
        let ll = ctx.eval(l).map(|pt| pt.log_likelihood);
        if let Some(v) = ll {
            if best_idx.map_or(true, |b| v > evals[b].unwrap()) {
                best_idx = Some(i);
            }
        }
        evals.push(ll);
    }
    let best_idx = best_idx.ok_or_else(|| {
        Error::numerical("fit_lmm", "likelihood not finite anywhere on the variance-ratio grid")
    })?;

    // Refine around the grid winner; near zero the bracket is linear, else
    // golden section on ln(lambda).
    let mut objective = |l: f64| ctx.eval(l).map_or(f64::NEG_INFINITY, |pt| pt.log_likelihood);
    let (lambda_hat, _) = if best_idx <= 1 {
        golden_max(&mut objective, 0.0, grid[2], 200)
    } else {
        let lo = grid[best_idx - 1].ln();
        let hi = grid[(best_idx + 1).min(grid.len() - 1)].max(grid[best_idx] * 1.5).ln();
        let mut g = |u: f64| objective(u.exp());
        let (u, ll) = golden_max(&mut g, lo, hi, 200);
        (u.exp(), ll)
    };
    // The refined point is at least as good as the grid winner by
    // construction of golden_max (bracket ends included).
    let pt = ctx
        .eval(lambda_hat)
        .ok_or_else(|| Error::numerical("fit_lmm", "final profile evaluation failed"))?;

    let cov = Cholesky::new(pt.xtwx.clone())
        .ok_or_else(|| Error::numerical("fit_lmm", "information matrix not positive definite"))?
        .inverse()
        * pt.sigma2;

    let mut estimates = vec![f64::NAN; p_declared];
    let mut std_errors = vec![f64::NAN; p_declared];
    for (c, &k) in kept.iter().enumerate() {
        estimates[k] = pt.beta[c] / scales[k];
        std_errors[k] = cov[(c, c)].max(0.0).sqrt() / scales[k];
    }

    Ok(LmmFit {
        names: names.to_vec(),
        estimates,
        std_errors,
        dropped,
        tau2: pt.lambda * pt.sigma2,
        sigma2: pt.sigma2,
        lambda: pt.lambda,
        log_likelihood: pt.log_likelihood,
        n_obs: n,
        n_groups,
        n_params: p_declared + 2,
        boundary: pt.lambda == 0.0,
    })
}
