//! Command-line entry point: argument parsing and summary printing over
//! [`proxiphene::pipeline`]. All analysis logic lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use chrono_tz::Tz;
use clap::{Args, Parser, Subcommand};

use proxiphene::cv::{CvOptions, ModelKind, Scheme};
use proxiphene::error::Error;
use proxiphene::features::entropy::MseParams;
use proxiphene::features::frequency::BandDefinition;
use proxiphene::features::FeatureConfig;
use proxiphene::pipeline::{
    run_all, run_associate, run_cv_audit, run_extract, run_ingest, run_lrt, run_predict,
    run_report, run_simulate, IngestConfig, PredictConfig, ReportInputs, RunAllConfig,
};
use proxiphene::predict::SamplerConfig;
use proxiphene::synth::GeneratorSpec;
use proxiphene::Result;

#[derive(Parser)]
#[command(
    name = "proxiphene",
    version,
    about = "Links hourly nearby-Bluetooth-device counts to PHQ-8 depressive-symptom severity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the input tables and assemble pre-questionnaire intervals
    Ingest(IngestArgs),
    /// Extract the 49 features of every interval into a CSV
    Extract(ExtractArgs),
    /// Test each feature's association with the score, BH-adjusted
    Associate(TableArgs),
    /// Compare the three nested mixed-effect models by likelihood ratio
    Lrt(TableArgs),
    /// Cross-validate the prediction models and write the score table
    Predict(PredictArgs),
    /// Dump every cross-validation split for external leakage auditing
    CvAudit(CvAuditArgs),
    /// Generate a synthetic cohort with known ground truth
    Simulate(SimulateArgs),
    /// Render the markdown report and the plot data files
    Report(ReportArgs),
    /// Run ingest through report into one directory
    RunAll(RunAllArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Scan table CSV (participant_id,timestamp,device_count)
    #[arg(long)]
    scans: PathBuf,
    /// Questionnaire table CSV (participant_id,date,score)
    #[arg(long)]
    phq8: PathBuf,
    /// Demographics CSV; validated when given
    #[arg(long)]
    demo: Option<PathBuf>,
    /// Reject questionnaires on or after this date
    #[arg(long, default_value = "2020-02-01")]
    cutoff: NaiveDate,
    /// IANA timezone defining local day boundaries
    #[arg(long, default_value = "UTC")]
    tz: Tz,
    /// Output intervals file (JSON Lines)
    #[arg(long)]
    out: PathBuf,
    /// Rejection ledger; defaults to rejections.csv beside --out
    #[arg(long)]
    rejections: Option<PathBuf>,
}

#[derive(Args)]
struct FeatureFlags {
    /// Sample-entropy template length m
    #[arg(long, default_value_t = 2)]
    mse_m: usize,
    /// Tolerance r as a fraction of the scale-1 standard deviation
    #[arg(long, default_value_t = 0.15)]
    mse_r_factor: f64,
    /// Highest coarse-graining scale
    #[arg(long, default_value_t = 24)]
    mse_max_scale: usize,
    /// Frequency band edges "mf_lo,mf_hi" in cycles/day
    #[arg(long, default_value = "0.75,1.25", value_parser = parse_bands)]
    fd_bands: BandDefinition,
}

impl FeatureFlags {
    fn to_config(&self) -> FeatureConfig {
        FeatureConfig {
            mse: MseParams {
                m: self.mse_m,
                r_factor: self.mse_r_factor,
                max_scale: self.mse_max_scale,
            },
            bands: self.fd_bands.clone(),
        }
    }
}

fn parse_bands(s: &str) -> std::result::Result<BandDefinition, String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| "want \"mf_lo,mf_hi\"".to_string())?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad edge '{lo}'"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad edge '{hi}'"))?;
    BandDefinition::with_edges(lo, hi).map_err(|e| e.to_string())
}

#[derive(Args)]
struct ExtractArgs {
    /// Intervals file written by `ingest`
    #[arg(long)]
    intervals: PathBuf,
    #[command(flatten)]
    features: FeatureFlags,
    /// Output features CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TableArgs {
    /// Features CSV written by `extract`
    #[arg(long)]
    features: PathBuf,
    /// Demographics CSV
    #[arg(long)]
    demo: PathBuf,
    /// Output artifact
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CvFlags {
    /// Cross-validation scheme; repeat for several (default: both)
    #[arg(long = "scheme", value_name = "SCHEME")]
    schemes: Vec<Scheme>,
    /// Prediction model; repeat for several (default: all four)
    #[arg(long = "model", value_name = "MODEL")]
    models: Vec<ModelKind>,
    /// Master seed for all sampler and fold randomness
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gibbs chains per fit
    #[arg(long, default_value_t = 4)]
    chains: usize,
    /// Draws per chain, burn-in included
    #[arg(long, default_value_t = 2000)]
    draws: usize,
    /// Burn-in draws discarded per chain
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    /// Clamp predictions into the 0-24 score range
    #[arg(long)]
    clip: bool,
}

impl CvFlags {
    fn to_config(&self) -> PredictConfig {
        let mut config = PredictConfig::default();
        if !self.schemes.is_empty() {
            config.schemes = self.schemes.clone();
        }
        if !self.models.is_empty() {
            config.models = self.models.clone();
        }
        config.options = CvOptions {
            seed: self.seed,
            sampler: SamplerConfig {
                chains: self.chains,
                draws_per_chain: self.draws,
                burn_in: self.burn_in,
                ..SamplerConfig::default()
            },
            clip: self.clip,
            ..CvOptions::default()
        };
        config
    }
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    demo: PathBuf,
    #[command(flatten)]
    cv: CvFlags,
    /// Output score table (JSON)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CvAuditArgs {
    #[arg(long)]
    features: PathBuf,
    /// Scheme to dump: lao or loo
    #[arg(long)]
    scheme: Scheme,
    /// Output splits file (JSON)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Generator spec JSON; omitted means the built-in default cohort
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the spec's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for scans.csv, phq8.csv, demographics.csv, ground_truth.json
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding the upstream artifacts under their run-all names
    #[arg(long, default_value = ".")]
    dir: PathBuf,
    /// Individual artifact overrides
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    intervals: Option<PathBuf>,
    #[arg(long)]
    associations: Option<PathBuf>,
    #[arg(long)]
    lrt: Option<PathBuf>,
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Output directory; defaults to --dir
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunAllArgs {
    #[arg(long)]
    scans: PathBuf,
    #[arg(long)]
    phq8: PathBuf,
    #[arg(long)]
    demo: PathBuf,
    #[arg(long, default_value = "2020-02-01")]
    cutoff: NaiveDate,
    #[arg(long, default_value = "UTC")]
    tz: Tz,
    #[command(flatten)]
    features: FeatureFlags,
    #[command(flatten)]
    cv: CvFlags,
    /// Directory all artifacts are written into
    #[arg(long)]
    out_dir: PathBuf,
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("PROXIPHENE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| Error::invalid_argument(format!("PROXIPHENE_THREADS '{raw}' is not a positive integer")))?;
    if n == 0 {
        return Err(Error::invalid_argument("PROXIPHENE_THREADS must be positive"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::invalid_argument(format!("thread pool: {e}")))
}

fn fmt_r2(r2: Option<f64>) -> String {
    r2.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".to_string())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => {
            let rejections = args
                .rejections
                .unwrap_or_else(|| args.out.parent().unwrap_or(".".as_ref()).join("rejections.csv"));
            let config = IngestConfig { timezone: args.tz, cutoff: args.cutoff };
            let summary = run_ingest(
                &args.scans,
                &args.phq8,
                args.demo.as_deref(),
                &config,
                &args.out,
                &rejections,
            )?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{} intervals -> {} ({} rejected -> {})",
                summary.n_intervals,
                args.out.display(),
                summary.n_rejections,
                rejections.display()
            );
        }
        Command::Extract(args) => {
            let summary = run_extract(&args.intervals, &args.features.to_config(), &args.out)?;
            for s in &summary.skipped {
                eprintln!("warning: skipped {s}");
            }
            println!(
                "{} feature rows -> {} ({} flagged)",
                summary.n_rows,
                args.out.display(),
                summary.n_flagged
            );
        }
        Command::Associate(args) => {
            let scan = run_associate(&args.features, &args.demo, &args.out)?;
            let significant = scan.results.iter().filter(|r| r.p_adjusted < 0.05).count();
            println!(
                "{} features tested, {} significant at adjusted P < .05, {} skipped -> {}",
                scan.results.len(),
                significant,
                scan.skipped.len(),
                args.out.display()
            );
        }
        Command::Lrt(args) => {
            let comparison = run_lrt(&args.features, &args.demo, &args.out)?;
            for t in &comparison.tests {
                println!(
                    "Model {} vs Model {}: chi2={:.2}, df={}, p={:.4}",
                    t.full_model, t.reduced_model, t.statistic, t.df, t.p_value
                );
            }
            println!("-> {}", args.out.display());
        }
        Command::Predict(args) => {
            let report = run_predict(&args.features, &args.demo, &args.cv.to_config(), &args.out)?;
            println!(
                "cohort: {} participants, {} intervals",
                report.n_participants, report.n_intervals
            );
            for row in &report.rows {
                for (name, cell) in [("LAO", &row.lao), ("LOO", &row.loo)] {
                    if let Some(c) = cell {
                        println!(
                            "{} [{name}]: R2={}, RMSE={:.3} ({} splits)",
                            row.display_name,
                            fmt_r2(c.r2),
                            c.rmse,
                            c.n_splits
                        );
                    }
                }
            }
            println!("-> {}", args.out.display());
        }
        Command::CvAudit(args) => {
            let artifact = run_cv_audit(&args.features, args.scheme, &args.out)?;
            println!(
                "{} {} splits over {} cohort rows ({} participants excluded) -> {}",
                artifact.n_splits,
                args.scheme,
                artifact.rows.len(),
                artifact.exclusions.len(),
                args.out.display()
            );
        }
        Command::Simulate(args) => {
            let spec = match &args.spec {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    serde_json::from_str::<GeneratorSpec>(&text)
                        .map_err(|e| Error::parse(path, format!("bad generator spec: {e}")))?
                }
                None => GeneratorSpec::default(),
            };
            let summary = run_simulate(&spec, args.spec.as_deref(), args.seed, &args.out_dir)?;
            println!(
                "{} participants, {} scans, {} questionnaires -> {}",
                summary.n_participants,
                summary.n_scans,
                summary.n_phq8,
                args.out_dir.display()
            );
        }
        Command::Report(args) => {
            let mut inputs = ReportInputs::in_dir(&args.dir);
            if let Some(p) = args.features {
                inputs.features = p;
            }
            if let Some(p) = args.intervals {
                inputs.intervals = p;
            }
            if let Some(p) = args.associations {
                inputs.associations = p;
            }
            if let Some(p) = args.lrt {
                inputs.lrt = p;
            }
            if let Some(p) = args.predictions {
                inputs.predictions = p;
            }
            let out_dir = args.out_dir.unwrap_or(args.dir);
            let written = run_report(&inputs, &out_dir)?;
            for path in written {
                println!("wrote {}", path.display());
            }
        }
        Command::RunAll(args) => {
            let config = RunAllConfig {
                ingest: IngestConfig { timezone: args.tz, cutoff: args.cutoff },
                features: args.features.to_config(),
                predict: args.cv.to_config(),
            };
            let written =
                run_all(&args.scans, &args.phq8, &args.demo, &config, &args.out_dir)?;
            for path in written {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads().and_then(|_| run(cli)) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    ExitCode::SUCCESS
}
