//! Acceptance suite: eight end-to-end correctness gates, one test each.
//!
//! Every numeric claim is checked against the independent reference
//! implementations in [`oracle`], against published distribution constants,
//! or against structural identities that hold by construction. Each test
//! prints a single summary line on success.

mod oracle;

use std::time::Instant;

use chrono::NaiveDate;
use proxiphene::cv::{
    audit_split, run_cv, select_prediction_cohort, splits_for, CvOptions, ModelKind, Scheme,
};
use proxiphene::domain::Phq8Record;
use proxiphene::features::entropy::sample_entropy;
use proxiphene::features::frequency::{band_features, power_spectrum, BandDefinition};
use proxiphene::features::{
    extract_all, extract_features, feature_index, FeatureConfig, FeatureTable, FeatureVector,
    FEATURE_NAMES, N_FEATURES, N_MSE, N_STAT,
};
use proxiphene::inference::{bh_adjust, chi2_critical, fit_lmm, pairwise_associations, LmmOptions};
use proxiphene::ingest::{assemble_intervals, bin_scans_to_days, DayGrid, NbdcInterval};
use proxiphene::predict::{fit_hblr, FeatureSubset, PredictionDesign, PredictionRow, Priors, SamplerConfig};
use proxiphene::synth::{generate_cohort, GeneratorSpec};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Relative comparison with an absolute floor of the same tolerance, so
/// near-zero features do not demand impossible precision.
fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1.0f64.max(a.abs()).max(b.abs())
}

fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

/// A random interval with 10 to 14 populated days, so sequence lengths span
/// 240 to 336. Values mix a circadian tone, day-level jitter, noise, and a
/// coin flip between integer counts and continuous rates, to vary how dense
/// template matching and band power are.
fn random_interval(seed: u64) -> NbdcInterval {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phq8_date = date("2019-06-15");
    let n_days = rng.random_range(10..=14usize);
    let mut offsets: Vec<i64> = (1..=14).collect();
    while offsets.len() > n_days {
        let k = rng.random_range(0..offsets.len());
        offsets.remove(k);
    }
    offsets.sort_unstable();
    offsets.reverse();

    let integer_counts = rng.random::<f64>() < 0.5;
    let base = rng.random_range(2.0..9.0);
    let amp = rng.random_range(0.0..4.0);
    let noise = rng.random_range(0.3..2.5);
    let mut days = Vec::with_capacity(n_days);
    let mut sequence = Vec::with_capacity(n_days * 24);
    for &back in &offsets {
        let day_date = phq8_date - chrono::Duration::days(back);
        let jitter: f64 = rng.random_range(-1.5..1.5);
        let mut hours = [None; 24];
        for (h, slot) in hours.iter_mut().enumerate() {
            let tone = amp * (2.0 * std::f64::consts::PI * h as f64 / 24.0).sin();
            let mut v: f64 = (base + jitter + tone + rng.random_range(-noise..noise)).max(0.0);
            if integer_counts {
                v = v.round();
            }
            *slot = Some(v);
            sequence.push(v);
        }
        days.push(DayGrid { participant_id: "P".into(), date: day_date, hours });
    }
    let interval = NbdcInterval {
        participant_id: "P".into(),
        phq8: Phq8Record::new("P", phq8_date, 9).unwrap(),
        days,
        sequence,
    };
    interval.check_invariants().unwrap();
    interval
}

#[test]
fn criterion_1_feature_oracle_equivalence() {
    let started = Instant::now();
    let config = FeatureConfig::default();
    let mut checked = 0usize;
    for seed in 0..100u64 {
        let interval = random_interval(seed);
        let got = extract_features(&interval, &config).unwrap();
        assert_eq!(got.values.len(), N_FEATURES);

        let day_values: Vec<[f64; 24]> =
            interval.days.iter().map(|d| d.values().unwrap()).collect();
        let stat = oracle::second_order(&day_values);
        for (name, want) in &stat {
            let idx = feature_index(name).unwrap();
            assert!(
                close(got.values[idx], *want, 1e-9),
                "seed {seed} {name}: {} vs oracle {want}",
                got.values[idx]
            );
        }

        let (mse_vals, mse_counts) = oracle::mse(&interval.sequence, 2, 0.15, 24);
        let mut r = 0.15 * oracle::sample_sd(&interval.sequence);
        if r == 0.0 {
            r = 1e-9;
        }
        for t in 1..=N_MSE {
            let idx = feature_index(&format!("MSE_{t}")).unwrap();
            assert!(
                close(got.values[idx], mse_vals[t - 1], 1e-9),
                "seed {seed} MSE_{t}: {} vs oracle {}",
                got.values[idx],
                mse_vals[t - 1]
            );
            // Integer template counts must agree exactly.
            let grained = oracle::coarse(&interval.sequence, t);
            let se = sample_entropy(&grained, 2, r).unwrap();
            assert_eq!(se.matches_m, mse_counts[t - 1].b, "seed {seed} scale {t} B count");
            assert_eq!(se.matches_m1, mse_counts[t - 1].a, "seed {seed} scale {t} A count");
        }

        let freq = oracle::frequency_features(&interval.sequence, 0.75, 1.25);
        for (k, want) in freq.iter().enumerate() {
            let idx = N_STAT + N_MSE + k;
            assert!(
                close(got.values[idx], *want, 1e-9),
                "seed {seed} {}: {} vs oracle {want}",
                FEATURE_NAMES[idx],
                got.values[idx]
            );
        }
        checked += 1;
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120, "oracle sweep took {elapsed:?}, budget is 2 min");
    println!(
        "criterion 1 PASS: 49 features x {checked} intervals match the oracles ({elapsed:?})"
    );
}

#[test]
fn criterion_2_spectral_identities() {
    // Parseval: band sums add up to the mean square, DC included.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let def = BandDefinition::default();
    for _ in 0..25 {
        let n = rng.random_range(240..=336usize);
        let seq: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let spectrum = power_spectrum(&seq).unwrap();
        let sums = band_features(&spectrum, &def).unwrap();
        let mean_square = seq.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let total = sums.lf_sum + sums.mf_sum + sums.hf_sum;
        assert!(
            close(total, mean_square, 1e-9),
            "Parseval violated at n={n}: {total} vs {mean_square}"
        );
    }

    // A grid-aligned 1 cycle/day tone concentrates all AC power in MF.
    let n = 336;
    let seq: Vec<f64> =
        (0..n).map(|t| 5.0 + 3.0 * (2.0 * std::f64::consts::PI * t as f64 / 24.0 + 0.7).sin()).collect();
    let spectrum = power_spectrum(&seq).unwrap();
    let sums = band_features(&spectrum, &def).unwrap();
    let ac_power: f64 = spectrum.power[1..].iter().sum();
    assert!(
        sums.mf_sum >= (1.0 - 1e-9) * ac_power,
        "MF holds {} of {} AC power",
        sums.mf_sum,
        ac_power
    );
    let peak = spectrum
        .power
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    assert_eq!(spectrum.frequencies[peak], 1.0, "tone peak off the 1 cycle/day bin");

    // Scaling invariance of percentages and entropies: bit-exact under a
    // power-of-two scale, 1e-12 otherwise.
    let config = FeatureConfig::default();
    for seed in 100..110u64 {
        let interval = random_interval(seed);
        let base = extract_features(&interval, &config).unwrap();
        for (scale, exact) in [(4.0, true), (3.0, false)] {
            let mut scaled = interval.clone();
            for v in scaled.sequence.iter_mut() {
                *v *= scale;
            }
            for day in scaled.days.iter_mut() {
                for h in day.hours.iter_mut() {
                    *h = h.map(|v| v * scale);
                }
            }
            let got = extract_features(&scaled, &config).unwrap();
            for name in ["LF_pct", "MF_pct", "HF_pct", "LF_se", "MF_se", "HF_se"] {
                let idx = feature_index(name).unwrap();
                if exact {
                    assert_eq!(
                        got.values[idx].to_bits(),
                        base.values[idx].to_bits(),
                        "seed {seed} {name} not bit-stable under x{scale}"
                    );
                } else {
                    assert!(
                        close(got.values[idx], base.values[idx], 1e-12),
                        "seed {seed} {name} drifted under x{scale}"
                    );
                }
            }
        }
    }
    println!("criterion 2 PASS: Parseval, MF tone capture, and scaling invariance hold");
}

#[test]
fn criterion_3_chi_squared_critical_values() {
    let cases = [(16usize, 26.296f64), (33, 47.400), (49, 66.339)];
    for (df, want) in cases {
        let got = chi2_critical(0.05, df).unwrap();
        let rounded = (got * 1000.0).round() / 1000.0;
        assert_eq!(rounded, want, "df {df}: {got} rounds to {rounded}, want {want}");
    }
    println!("criterion 3 PASS: upper 5% chi-squared quantiles at df 16/33/49 match to 3 decimals");
}

/// Group-centered noise has exactly zero between-group residual component,
/// so the variance ratio lands on the boundary and the fit must be OLS.
fn centered_noise_dataset(seed: u64) -> (Vec<f64>, Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_groups = 25;
    let per = 8;
    let mut x = Vec::new();
    let mut groups = Vec::new();
    for i in 0..n_groups * per {
        x.push(vec![1.0, rng.random_range(-2.0..2.0), rng.random_range(0.0..5.0)]);
        groups.push(i / per);
    }
    let mut y = vec![0.0; x.len()];
    for g in 0..n_groups {
        let rows: Vec<usize> = (g * per..(g + 1) * per).collect();
        let eps: Vec<f64> = rows.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let center = eps.iter().sum::<f64>() / eps.len() as f64;
        for (&i, e) in rows.iter().zip(&eps) {
            y[i] = 1.5 + 2.0 * x[i][1] - 1.0 * x[i][2] + (e - center);
        }
    }
    (y, x, groups)
}

#[test]
fn criterion_4_lmm_bh_correctness() {
    let names: Vec<String> = ["intercept", "a", "b"].iter().map(|s| s.to_string()).collect();
    for seed in 0..30u64 {
        let (y, x, groups) = centered_noise_dataset(seed);
        let design = DMatrix::from_fn(y.len(), 3, |i, j| x[i][j]);
        let fit = fit_lmm(&y, &design, &groups, &names, &LmmOptions::default()).unwrap();
        let beta = oracle::ols(&x, &y);
        for k in 0..3 {
            assert!(
                close(fit.estimates[k], beta[k], 1e-6),
                "seed {seed} beta[{k}]: {} vs OLS {}",
                fit.estimates[k],
                beta[k]
            );
        }
        assert!(fit.tau2 < 1e-8, "seed {seed} tau2 = {}", fit.tau2);
    }

    // Null likelihood-ratio statistics: 2 * delta log-likelihood for 3
    // zero-coefficient extra columns referred to chi-squared(3).
    let q = 3usize;
    let reduced_names: Vec<String> =
        ["intercept", "x1", "x2"].iter().map(|s| s.to_string()).collect();
    let full_names: Vec<String> = ["intercept", "x1", "x2", "z1", "z2", "z3"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut stats = Vec::with_capacity(500);
    for seed in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(40_000 + seed);
        let n_groups = 40;
        let per = 8;
        let n = n_groups * per;
        let full = DMatrix::from_fn(n, 6, |_, j| if j == 0 { 1.0 } else { normal.sample(&mut rng) });
        let groups: Vec<usize> = (0..n).map(|i| i / per).collect();
        let intercepts: Vec<f64> = (0..n_groups).map(|_| normal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                1.0 + 0.8 * full[(i, 1)] - 0.5 * full[(i, 2)]
                    + intercepts[groups[i]]
                    + normal.sample(&mut rng)
            })
            .collect();
        let reduced = full.clone().remove_columns(3, q);
        let fit_full = fit_lmm(&y, &full, &groups, &full_names, &LmmOptions::default()).unwrap();
        let fit_reduced =
            fit_lmm(&y, &reduced, &groups, &reduced_names, &LmmOptions::default()).unwrap();
        stats.push((2.0 * (fit_full.log_likelihood - fit_reduced.log_likelihood)).max(0.0));
    }
    let chi2 = ChiSquared::new(q as f64).unwrap();
    let p = oracle::ks_p_value(&stats, |x| chi2.cdf(x));
    assert!(p > 0.01, "null LRT distribution fails KS vs chi-squared({q}): p = {p}");

    // BH equals the double-loop definition exactly, ties included.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..1000 {
        let m = rng.random_range(1..=80usize);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                let v: f64 = rng.random();
                if rng.random::<f64>() < 0.3 {
                    (v * 100.0).round() / 100.0
                } else {
                    v
                }
            })
            .collect();
        let got = bh_adjust(&p).unwrap();
        let want = oracle::bh_double_loop(&p);
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            assert_eq!(g.to_bits(), w.to_bits(), "case {case} index {i}: {g} vs {w}");
        }
    }
    println!(
        "criterion 4 PASS: boundary fits match OLS at 1e-6, null LRT KS p = {p:.3}, BH exact on 1000 vectors"
    );
}

/// Scans a generated cohort into a feature-table skeleton; feature values
/// are irrelevant to split construction.
fn cohort_table(spec: &GeneratorSpec) -> (FeatureTable, Vec<proxiphene::domain::Demographics>) {
    let cohort = generate_cohort(spec).unwrap();
    let days = bin_scans_to_days(&cohort.scans, chrono_tz::Tz::UTC);
    let (intervals, _) = assemble_intervals(&days, &cohort.phq8, date("2030-01-01")).unwrap();
    let rows = intervals
        .iter()
        .map(|iv| FeatureVector {
            participant_id: iv.participant_id.clone(),
            date: iv.phq8.date,
            phq8: iv.phq8.score,
            values: vec![0.0; N_FEATURES],
            flags: Vec::new(),
        })
        .collect();
    (FeatureTable::new(rows), cohort.demographics)
}

#[test]
fn criterion_5_cv_split_integrity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut audited = 0usize;
    for cohort_idx in 0..50u64 {
        let mut spec = GeneratorSpec { seed: 500 + cohort_idx, ..GeneratorSpec::default() };
        spec.n_participants = rng.random_range(6..=16);
        spec.intervals_min = rng.random_range(2..=4);
        spec.intervals_max = spec.intervals_min + rng.random_range(0..=4);
        spec.trace.missingness_rate = rng.random_range(0.05..0.25);
        let (raw, _) = cohort_table(&spec);
        let (table, exclusions) = select_prediction_cohort(&raw).unwrap();
        for ex in &exclusions {
            assert!(
                ex.n_intervals < 3 || ex.score_range < 5,
                "cohort {cohort_idx}: {} excluded without cause",
                ex.participant_id
            );
        }
        if table.is_empty() {
            continue;
        }
        let mut counts = std::collections::BTreeMap::<&str, usize>::new();
        for row in &table.rows {
            *counts.entry(row.participant_id.as_str()).or_default() += 1;
        }
        for scheme in [Scheme::Lao, Scheme::Loo] {
            let splits = splits_for(&table, scheme).unwrap();
            let mut test_total = 0usize;
            for split in &splits {
                audit_split(&table, split).unwrap();
                test_total += split.test_rows.len();
                audited += 1;
            }
            let drop_per = match scheme {
                Scheme::Lao => 1,
                Scheme::Loo => 2,
            };
            let want: usize = counts.values().map(|&t| t - drop_per).sum();
            assert_eq!(
                test_total, want,
                "cohort {cohort_idx} {scheme:?}: test rows {test_total}, identity wants {want}"
            );
        }
    }
    assert!(audited > 500, "only {audited} splits audited; cohorts came out too small");

    // A cohort whose longest participant has 27 intervals steps through
    // exactly 26 forecasting origins.
    let spec = GeneratorSpec {
        seed: 41,
        n_participants: 4,
        intervals_min: 27,
        intervals_max: 27,
        trace: proxiphene::synth::TraceModel {
            missingness_rate: 0.0,
            ..GeneratorSpec::default().trace
        },
        ..GeneratorSpec::default()
    };
    let (raw, _) = cohort_table(&spec);
    let (table, _) = select_prediction_cohort(&raw).unwrap();
    let max_t = {
        let mut counts = std::collections::BTreeMap::<&str, usize>::new();
        for row in &table.rows {
            *counts.entry(row.participant_id.as_str()).or_default() += 1;
        }
        counts.values().copied().max().unwrap()
    };
    assert_eq!(max_t, 27, "max interval count not preserved through ingestion");
    let splits = splits_for(&table, Scheme::Lao).unwrap();
    assert_eq!(splits.len(), 26, "T = 27 must give 26 leave-all-out iterations");
    println!("criterion 5 PASS: {audited} splits audited leak-free, count identities and T-1 hold");
}

#[test]
fn criterion_6_posterior_recovery() {
    let started = Instant::now();
    let theta_true = [0.8f64, -0.15, 1.2, 0.35];
    let tau = 2.0f64; // tau^2 = 4
    let sigma = 2.0f64; // sigma^2 = 4
    let n_participants = 100;
    let per = 8;
    let runs = 20u64;
    let mut covered = [0usize; 4];
    for run in 1..=runs {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + run);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::with_capacity(n_participants * per);
        for j in 0..n_participants {
            let alpha = 10.0 + tau * normal.sample(&mut rng);
            for _ in 0..per {
                let last_score = 12.0 + 3.0 * normal.sample(&mut rng);
                let age = 45.0 + 12.0 * normal.sample(&mut rng);
                let female = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
                let education = 14.0 + 2.5 * normal.sample(&mut rng);
                let x = [last_score, age, female, education];
                let mean: f64 =
                    alpha + x.iter().zip(&theta_true).map(|(v, t)| v * t).sum::<f64>();
                rows.push(PredictionRow {
                    participant_id: format!("S{j:03}"),
                    target: mean + sigma * normal.sample(&mut rng),
                    last_score,
                    age,
                    female,
                    education,
                    features: Vec::new(),
                });
            }
        }
        let design = PredictionDesign::new(rows, FeatureSubset::None).unwrap();
        let config = SamplerConfig { seed: run, ..SamplerConfig::default() };
        let posterior = fit_hblr(&design, &Priors::default(), &config).unwrap();
        assert!(
            posterior.converged && posterior.max_r_hat() < 1.05,
            "run {run}: R-hat {:.4} breaches 1.05",
            posterior.max_r_hat()
        );
        // Draws live on the standardized scale; map the truth onto it.
        let sds = &posterior.standardizer.sds;
        for (k, t) in theta_true.iter().enumerate() {
            let scaled_truth = t * sds[k];
            let mut draws: Vec<f64> = posterior.theta.iter().map(|d| d[k]).collect();
            draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let lo = draws[(0.025 * draws.len() as f64).floor() as usize];
            let hi = draws[((0.975 * draws.len() as f64).ceil() as usize).min(draws.len()) - 1];
            if lo <= scaled_truth && scaled_truth <= hi {
                covered[k] += 1;
            }
        }
    }
    for (k, c) in covered.iter().enumerate() {
        assert!(
            *c >= 18,
            "coefficient {k} covered in only {c}/{runs} runs: {covered:?}"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 600, "recovery sweep took {elapsed:?}, budget is 10 min");
    println!(
        "criterion 6 PASS: 95% intervals covered truth {covered:?} of {runs} runs, all R-hat < 1.05 ({elapsed:?})"
    );
}

/// End-to-end feature table for one generated cohort.
fn extracted_cohort(
    spec: &GeneratorSpec,
) -> (FeatureTable, Vec<proxiphene::domain::Demographics>) {
    let cohort = generate_cohort(spec).unwrap();
    let days = bin_scans_to_days(&cohort.scans, chrono_tz::Tz::UTC);
    let (intervals, _) = assemble_intervals(&days, &cohort.phq8, date("2030-01-01")).unwrap();
    let vectors = extract_all(&intervals, &FeatureConfig::default()).unwrap();
    (FeatureTable::new(vectors), cohort.demographics)
}

#[test]
fn criterion_7_planted_directions_and_model_ordering() {
    // (a) Association signs follow the planted links: lower device-count
    // level, weaker circadian amplitude, and more irregularity with worse
    // symptoms.
    let (table, demographics) = extracted_cohort(&GeneratorSpec::default());
    let scan = pairwise_associations(&table, &demographics).unwrap();
    let result = |name: &str| {
        scan.results
            .iter()
            .find(|r| r.feature == name)
            .unwrap_or_else(|| panic!("{name} missing from scan"))
    };
    for name in ["Mean_Mean", "MF_sum", "Min_Max"] {
        let r = result(name);
        assert!(r.estimate < 0.0, "{name} estimate {} should be negative", r.estimate);
    }
    // The level and regularity channels are planted strongly enough to also
    // clear the BH threshold; Min_Max rides a weaker extreme-value channel,
    // so only its sign is pinned.
    for name in ["Mean_Mean", "MF_sum"] {
        let r = result(name);
        assert!(r.p_adjusted < 0.05, "{name} not significant: {}", r.p_adjusted);
    }
    let mse1 = result("MSE_1");
    assert!(mse1.estimate > 0.0, "MSE_1 estimate {} should be positive", mse1.estimate);
    assert!(mse1.p_adjusted < 0.05, "MSE_1 not significant: {}", mse1.p_adjusted);

    // (b) Feature-informed prediction beats the no-feature baseline on
    // pooled leave-all-out R2, and the full feature set beats the
    // second-order-only subset, across seeded replicate cohorts.
    let runs = 20u64;
    let mut all_beats_baseline = 0usize;
    let mut all_beats_stat = 0usize;
    for run in 1..=runs {
        // Enough participants that even the first leave-all-out fold
        // trains on more rows than the 53-column design has predictors,
        // the regime the published comparison ran in.
        let spec = GeneratorSpec {
            seed: 7000 + run,
            n_participants: 60,
            ..GeneratorSpec::default()
        };
        let (raw, demographics) = extracted_cohort(&spec);
        let (table, _) = select_prediction_cohort(&raw).unwrap();
        let options = CvOptions {
            seed: run,
            sampler: SamplerConfig {
                chains: 2,
                draws_per_chain: 800,
                burn_in: 400,
                ..SamplerConfig::default()
            },
            // Scores live on 0-24, so clamp all models alike. Early
            // leave-all-out folds train on a handful of rows, where an
            // unclamped wide-prior posterior can splat far outside the
            // scale and swamp the pooled metric.
            clip: true,
            ..CvOptions::default()
        };
        let r2 = |model: ModelKind| {
            run_cv(&table, &demographics, Scheme::Lao, model, &options)
                .unwrap()
                .metrics
                .r2
                .expect("pooled test targets cannot be constant after the range filter")
        };
        let baseline = r2(ModelKind::Baseline);
        let hblr_stat = r2(ModelKind::HblrStatistical);
        let hblr_all = r2(ModelKind::HblrAll);
        eprintln!("run {run}: baseline {baseline:.4} stat {hblr_stat:.4} all {hblr_all:.4}");
        if hblr_all > baseline {
            all_beats_baseline += 1;
        }
        if hblr_all > hblr_stat {
            all_beats_stat += 1;
        }
    }
    assert!(
        all_beats_baseline >= 18,
        "full model beat baseline in only {all_beats_baseline}/{runs} runs"
    );
    assert!(
        all_beats_stat >= 15,
        "full model beat the statistical subset in only {all_beats_stat}/{runs} runs"
    );
    println!(
        "criterion 7 PASS: planted signs reproduced; full model beat baseline {all_beats_baseline}/{runs} and the statistical subset {all_beats_stat}/{runs}"
    );
}

#[test]
fn criterion_8_run_all_determinism() {
    let bin = env!("CARGO_BIN_EXE_proxiphene");
    let tmp = tempfile::tempdir().unwrap();
    let sim_dir = tmp.path().join("sim");
    let status = std::process::Command::new(bin)
        .args(["simulate", "--seed", "8", "--out-dir"])
        .arg(&sim_dir)
        .status()
        .unwrap();
    assert!(status.success(), "simulate failed");

    let mut dirs = Vec::new();
    for name in ["run_a", "run_b"] {
        let out = tmp.path().join(name);
        let status = std::process::Command::new(bin)
            .arg("run-all")
            .arg("--scans")
            .arg(sim_dir.join("scans.csv"))
            .arg("--phq8")
            .arg(sim_dir.join("phq8.csv"))
            .arg("--demo")
            .arg(sim_dir.join("demographics.csv"))
            .args(["--scheme", "lao", "--model", "baseline", "--model", "lasso"])
            .args(["--seed", "8", "--chains", "2", "--draws", "300", "--burn-in", "150"])
            .arg("--out-dir")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "run-all failed in {name}");
        dirs.push(out);
    }

    let list = |dir: &std::path::Path| -> Vec<String> {
        let mut names: Vec<String> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        names
    };
    let names = list(&dirs[0]);
    assert_eq!(names, list(&dirs[1]), "artifact sets differ");
    assert!(names.contains(&"report.md".to_string()));
    for name in &names {
        let a = std::fs::read(dirs[0].join(name)).unwrap();
        let b = std::fs::read(dirs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    println!("criterion 8 PASS: {} artifacts byte-identical across consecutive runs", names.len());
}
