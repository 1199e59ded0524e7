//! Independent reference implementations backing the acceptance criteria.
//!
//! Everything here is deliberately naive and shares no code with the
//! library: sample-entropy match counting walks every template pair in an
//! O(N^2) double loop, spectra come from direct DFT summation, interval
//! statistics from day-by-day loops, OLS from hand-rolled normal equations,
//! and the BH adjustment from a double loop over ranks.

use std::collections::BTreeMap;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation, n-1 denominator, 0 below 2 values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// The 16 second-order statistics of an interval's days, keyed
/// `<across-days>_<daily>` (`Mean_Max` is the mean of the daily maxima).
pub fn second_order(days: &[[f64; 24]]) -> BTreeMap<String, f64> {
    let mut daily: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for day in days {
        daily.entry("Max").or_default().push(max(day));
        daily.entry("Min").or_default().push(min(day));
        daily.entry("Mean").or_default().push(mean(day));
        daily.entry("Std").or_default().push(sample_sd(day));
    }
    let mut out = BTreeMap::new();
    for (inner, series) in &daily {
        out.insert(format!("Max_{inner}"), max(series));
        out.insert(format!("Min_{inner}"), min(series));
        out.insert(format!("Mean_{inner}"), mean(series));
        out.insert(format!("Std_{inner}"), sample_sd(series));
    }
    out
}

/// Non-overlapping block means; the trailing remainder is dropped.
pub fn coarse(seq: &[f64], scale: usize) -> Vec<f64> {
    let blocks = seq.len() / scale;
    let mut out = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let mut s = 0.0;
        for k in 0..scale {
            s += seq[b * scale + k];
        }
        out.push(s / scale as f64);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampenCounts {
    /// Matching unordered template pairs of length m.
    pub b: u64,
    /// Matching unordered template pairs of length m+1.
    pub a: u64,
}

/// Explicit template-pair counting. Both template lengths start at positions
/// `0..n-m`; a pair matches when the Chebyshev distance is `<= r`.
pub fn sampen_counts(seq: &[f64], m: usize, r: f64) -> SampenCounts {
    let n = seq.len();
    let templates_m: Vec<&[f64]> = (0..n - m).map(|i| &seq[i..i + m]).collect();
    let templates_m1: Vec<&[f64]> = (0..n - m).map(|i| &seq[i..i + m + 1]).collect();
    let chebyshev_ok =
        |u: &[f64], v: &[f64]| u.iter().zip(v).all(|(x, y)| (x - y).abs() <= r);
    let mut b = 0u64;
    let mut a = 0u64;
    for i in 0..templates_m.len() {
        for j in (i + 1)..templates_m.len() {
            if chebyshev_ok(templates_m[i], templates_m[j]) {
                b += 1;
            }
            if chebyshev_ok(templates_m1[i], templates_m1[j]) {
                a += 1;
            }
        }
    }
    SampenCounts { b, a }
}

/// `-ln(A/B)`, or `-ln(2/((n-m)(n-m-1)))` when either count is zero.
pub fn sampen_value(n: usize, m: usize, c: SampenCounts) -> f64 {
    if c.a == 0 || c.b == 0 {
        let t = (n - m) as f64;
        return -(2.0 / (t * (t - 1.0))).ln();
    }
    -((c.a as f64) / (c.b as f64)).ln()
}

/// MSE_1..MSE_max_scale with `r = r_factor * sd(scale-1)` fixed across
/// scales (1e-9 for a constant sequence), plus the raw counts per scale.
pub fn mse(seq: &[f64], m: usize, r_factor: f64, max_scale: usize) -> (Vec<f64>, Vec<SampenCounts>) {
    let mut r = r_factor * sample_sd(seq);
    if r == 0.0 {
        r = 1e-9;
    }
    let mut values = Vec::with_capacity(max_scale);
    let mut counts = Vec::with_capacity(max_scale);
    for scale in 1..=max_scale {
        let grained = coarse(seq, scale);
        let c = sampen_counts(&grained, m, r);
        values.push(sampen_value(grained.len(), m, c));
        counts.push(c);
    }
    (values, counts)
}

/// One-sided power spectrum by direct DFT summation: bin k at `24k/n`
/// cycles/day carries `|X_k|^2 / n^2`, doubled on interior bins.
pub fn dft_power(seq: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = seq.len();
    let half = n / 2;
    let mut freqs = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for (t, &x) in seq.iter().enumerate() {
            let phase = -2.0 * std::f64::consts::PI * (k as f64) * (t as f64) / n as f64;
            re += x * phase.cos();
            im += x * phase.sin();
        }
        let mut p = (re * re + im * im) / ((n * n) as f64);
        if k > 0 && !(n % 2 == 0 && k == half) {
            p *= 2.0;
        }
        freqs.push(k as f64 * 24.0 / n as f64);
        power.push(p);
    }
    (freqs, power)
}

/// The 9 frequency features in emission order `LF_sum, MF_sum, HF_sum,
/// LF_pct, MF_pct, HF_pct, LF_se, MF_se, HF_se` under the default band
/// conventions: DC in LF, LF right-open at `mf_lo`, MF closed on both ends,
/// percentages over total power, entropies normalized by ln(#bins).
pub fn frequency_features(seq: &[f64], mf_lo: f64, mf_hi: f64) -> [f64; 9] {
    let (freqs, power) = dft_power(seq);
    let band_of = |k: usize, f: f64| -> usize {
        if k == 0 || f < mf_lo {
            0
        } else if f <= mf_hi {
            1
        } else {
            2
        }
    };
    let mut bins: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (k, (&f, &p)) in freqs.iter().zip(&power).enumerate() {
        bins[band_of(k, f)].push(p);
    }
    let total: f64 = power.iter().sum();
    let sums: Vec<f64> = bins.iter().map(|b| b.iter().sum()).collect();
    let pct = |s: f64| if total == 0.0 { 0.0 } else { s / total };
    let se = |b: &[f64]| -> f64 {
        let band_total: f64 = b.iter().sum();
        if band_total == 0.0 || b.len() < 2 {
            return 0.0;
        }
        let mut h = 0.0;
        for &p in b {
            let q = p / band_total;
            if q > 0.0 {
                h -= q * q.ln();
            }
        }
        h / (b.len() as f64).ln()
    };
    [
        sums[0],
        sums[1],
        sums[2],
        pct(sums[0]),
        pct(sums[1]),
        pct(sums[2]),
        se(&bins[0]),
        se(&bins[1]),
        se(&bins[2]),
    ]
}

/// OLS coefficients from the normal equations, Gaussian elimination with
/// partial pivoting. `x` is row-major with an explicit intercept column if
/// one is wanted.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let p = x[0].len();
    let mut a = vec![vec![0.0f64; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for row in 0..n {
                s += x[row][i] * x[row][j];
            }
            a[i][j] = s;
        }
        let mut s = 0.0;
        for row in 0..n {
            s += x[row][i] * y[row];
        }
        a[i][p] = s;
    }
    for col in 0..p {
        let pivot = (col..p).max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs())).unwrap();
        a.swap(col, pivot);
        assert!(a[col][col].abs() > 1e-12, "singular normal equations");
        for row in (col + 1)..p {
            let f = a[row][col] / a[col][col];
            for k in col..=p {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut beta = vec![0.0f64; p];
    for row in (0..p).rev() {
        let mut s = a[row][p];
        for k in (row + 1)..p {
            s -= a[row][k] * beta[k];
        }
        beta[row] = s / a[row][row];
    }
    beta
}

/// Literal step-up definition: the adjusted value at rank i is the minimum
/// of `m * p / rank` over all ranks at or after i, clipped at 1, written
/// back in input order. Ties keep input order via the stable sort.
pub fn bh_double_loop(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap());
    let mut out = vec![0.0; m];
    for (pos, &idx) in order.iter().enumerate() {
        let mut best = f64::INFINITY;
        for rank in (pos + 1)..=m {
            best = best.min(p[order[rank - 1]] * m as f64 / rank as f64);
        }
        out[idx] = best.min(1.0);
    }
    out
}

/// One-sample Kolmogorov-Smirnov p-value against a continuous CDF, via the
/// asymptotic Kolmogorov distribution with the Stephens small-sample factor.
pub fn ks_p_value(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sample.len();
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let hi = (i + 1) as f64 / n as f64 - f;
        let lo = f - i as f64 / n as f64;
        d = d.max(hi).max(lo);
    }
    let rn = (n as f64).sqrt();
    let lambda = (rn + 0.12 + 0.11 / rn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
    }
    p.clamp(0.0, 1.0)
}
