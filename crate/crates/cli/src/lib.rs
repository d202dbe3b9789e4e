//! Command-line front end for `rulsif`.
//!
//! Every command prints a single line of JSON on success. Failures print one
//! `error[<kind>]: <message>` line to stderr and exit with 2 (usage), 3 (data)
//! or 4 (numerical).

pub mod csv;
pub mod error;
pub mod repro;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rulsif::divergence::estimate;
use rulsif::homogeneity::{lstt, Direction, Refit, Statistic, TestConfig};
use rulsif::outlier::{auc, fit_outlier_model, ScoredSet};
use rulsif::synthdata::{paper_dataset, DatasetTag};
use rulsif::{fit, CvEntry, RulsifConfig, RulsifModel, SigmaGrid};

use crate::csv::{read_labels, read_samples, HeaderMode};
pub use crate::error::CliError;
use crate::repro::{Experiment, ReproOptions};

#[derive(Debug, Parser)]
#[command(name = "rulsif", version, about = "Relative density-ratio estimation and its applications")]
pub struct Cli {
    /// Worker threads; falls back to RULSIF_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a ratio model with cross-validated width and ridge.
    Fit(FitArgs),
    /// Estimate the relative Pearson divergence with a saved model.
    Pe(PeArgs),
    /// Permutation two-sample test.
    Test(TestArgs),
    /// Score evaluation samples for outlyingness.
    Outlier(OutlierArgs),
    /// Reproduce a synthetic experiment as a CSV table.
    Repro(ReproArgs),
    /// Write samples of one of the synthetic datasets a..e.
    Dataset(DatasetArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Mixing parameter in [0, 1).
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Comma-separated kernel widths; default scales the median distance.
    #[arg(long, value_delimiter = ',')]
    sigma_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = rulsif::estimator::DEFAULT_CV_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = rulsif::estimator::DEFAULT_MAX_CENTERS)]
    max_centers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn config(&self) -> Result<RulsifConfig, CliError> {
        let mut cfg = RulsifConfig::new(self.alpha)
            .with_folds(self.folds)
            .with_max_centers(self.max_centers)
            .with_seed(self.seed);
        if let Some(g) = &self.sigma_grid {
            cfg = cfg.with_sigma_grid(SigmaGrid::Fixed(g.clone()));
        }
        if let Some(g) = &self.lambda_grid {
            cfg = cfg.with_lambda_grid(g.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    numerator: PathBuf,
    denominator: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Where to write the model JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    header: HeaderMode,
}

#[derive(Debug, Args)]
struct PeArgs {
    model: PathBuf,
    numerator: PathBuf,
    denominator: PathBuf,
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    header: HeaderMode,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum DirectionArg {
    Plain,
    Reciprocal,
    Adaptive,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum StatisticArg {
    PeHat,
    PeTilde,
}

#[derive(Debug, Args)]
struct TestArgs {
    x: PathBuf,
    x_prime: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = DirectionArg::Plain)]
    direction: DirectionArg,
    #[arg(long, default_value_t = 100)]
    permutations: usize,
    #[arg(long, default_value_t = 0.05)]
    significance: f64,
    #[arg(long, value_enum, default_value_t = StatisticArg::PeHat)]
    statistic: StatisticArg,
    /// Reuse the observed split's width and ridge for every permutation.
    #[arg(long)]
    fast: bool,
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    header: HeaderMode,
}

#[derive(Debug, Args)]
struct OutlierArgs {
    model_set: PathBuf,
    evaluation_set: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// One label per evaluation row, 1 marking an outlier.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Where to write the per-sample scores.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    header: HeaderMode,
}

#[derive(Debug, Args)]
struct ReproArgs {
    #[arg(value_enum)]
    experiment: Experiment,
    /// Trials per configuration; each experiment has its own default.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Permutations per two-sample test.
    #[arg(long, default_value_t = 100)]
    permutations: usize,
    /// Override the mixing parameters (flattening parameters for covshift).
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Override the sample sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Approximate permutation tests that skip per-permutation cross-validation.
    #[arg(long)]
    fast: bool,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    #[arg(value_parser = parse_tag)]
    tag: DatasetTag,
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 300)]
    n_prime: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for numerator.csv and denominator.csv.
    #[arg(long)]
    out: PathBuf,
}

fn parse_tag(s: &str) -> Result<DatasetTag, String> {
    s.parse().map_err(|e: rulsif::Error| e.to_string())
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("output serializes")
}

#[derive(Serialize)]
struct FitSummary<'a> {
    alpha: f64,
    sigma: f64,
    lambda: f64,
    score: f64,
    centers: usize,
    entries: &'a [CvEntry],
}

fn cmd_fit(args: &FitArgs) -> Result<String, CliError> {
    let cfg = args.model.config()?;
    let num = read_samples(&args.numerator, args.header)?;
    let den = read_samples(&args.denominator, args.header)?;
    let model = fit(&num, &den, &cfg)?;
    let mut doc = model.to_json();
    doc.push('\n');
    write_file(&args.out, &doc)?;
    let report = model.cv_report().expect("cross-validated fit");
    Ok(json(&FitSummary {
        alpha: model.alpha(),
        sigma: model.sigma(),
        lambda: model.lambda(),
        score: report.selected_score(),
        centers: model.kernel().num_centers(),
        entries: &report.entries,
    }))
}

fn load_model(path: &Path) -> Result<RulsifModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    RulsifModel::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn cmd_pe(args: &PeArgs) -> Result<String, CliError> {
    let model = load_model(&args.model)?;
    let num = read_samples(&args.numerator, args.header)?;
    let den = read_samples(&args.denominator, args.header)?;
    Ok(json(&estimate(&model, &num, &den)?))
}

fn cmd_test(args: &TestArgs) -> Result<String, CliError> {
    let mut cfg = TestConfig::new(args.model.alpha).with_permutations(args.permutations);
    cfg.rulsif = args.model.config()?;
    cfg.significance = args.significance;
    cfg.direction = match args.direction {
        DirectionArg::Plain => Direction::Plain,
        DirectionArg::Reciprocal => Direction::Reciprocal,
        DirectionArg::Adaptive => Direction::Adaptive,
    };
    cfg.statistic = match args.statistic {
        StatisticArg::PeHat => Statistic::PeHat,
        StatisticArg::PeTilde => Statistic::PeTilde,
    };
    if args.fast {
        cfg.refit = Refit::FixedParameters;
    }
    cfg.validate()?;
    let x = read_samples(&args.x, args.header)?;
    let xp = read_samples(&args.x_prime, args.header)?;
    Ok(json(&lstt(&x, &xp, &cfg, args.model.seed)?))
}

#[derive(Serialize)]
struct OutlierSummary {
    alpha: f64,
    sigma: f64,
    lambda: f64,
    n: usize,
    n_prime: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    auc: Option<f64>,
}

fn cmd_outlier(args: &OutlierArgs) -> Result<String, CliError> {
    let cfg = args.model.config()?;
    let model_set = read_samples(&args.model_set, args.header)?;
    let evaluation = read_samples(&args.evaluation_set, args.header)?;
    let labels = match &args.labels {
        Some(p) => {
            let l = read_labels(p, args.header)?;
            if l.len() != evaluation.len() {
                return Err(CliError::Data(format!(
                    "{}: {} labels for {} evaluation rows",
                    p.display(),
                    l.len(),
                    evaluation.len()
                )));
            }
            Some(l)
        }
        None => None,
    };
    let model = fit_outlier_model(&model_set, &evaluation, &cfg)?;
    let scored = ScoredSet::new(model.predict(&evaluation)?.to_vec(), labels)?;
    let rows: Vec<Vec<String>> = scored
        .scores
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut row = vec![i.to_string(), s.to_string()];
            if let Some(l) = &scored.labels {
                row.push(u8::from(l[i]).to_string());
            }
            row
        })
        .collect();
    let header: &[&str] = if scored.labels.is_some() { &["index", "score", "label"] } else { &["index", "score"] };
    write_file(&args.out, &csv::render(header, &rows))?;
    let auc = match &scored.labels {
        Some(_) => Some(auc(&scored)?),
        None => None,
    };
    Ok(json(&OutlierSummary {
        alpha: model.alpha(),
        sigma: model.sigma(),
        lambda: model.lambda(),
        n: model_set.len(),
        n_prime: evaluation.len(),
        auc,
    }))
}

#[derive(Serialize)]
struct ReproSummary<'a> {
    experiment: &'a str,
    seed: u64,
    file: String,
    rows: usize,
}

fn cmd_repro(args: &ReproArgs) -> Result<String, CliError> {
    let opts = ReproOptions {
        runs: args.runs,
        seed: args.seed,
        permutations: args.permutations,
        alphas: args.alphas.clone(),
        sizes: args.sizes.clone(),
        fast: args.fast,
    };
    let table = repro::run(args.experiment, &opts)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    write_file(&args.out.join(table.file_name()), &table.render())?;
    Ok(json(&ReproSummary {
        experiment: args.experiment.name(),
        seed: args.seed,
        file: table.file_name(),
        rows: table.rows.len(),
    }))
}

#[derive(Serialize)]
struct DatasetSummary {
    dataset: String,
    n: usize,
    n_prime: usize,
    seed: u64,
}

fn cmd_dataset(args: &DatasetArgs) -> Result<String, CliError> {
    if args.n == 0 || args.n_prime == 0 {
        return Err(CliError::Usage("--n and --n-prime must be positive".into()));
    }
    let data = paper_dataset(args.tag, args.n, args.n_prime, args.seed)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    csv::write_samples(&args.out.join("numerator.csv"), &data.numerator)?;
    csv::write_samples(&args.out.join("denominator.csv"), &data.denominator)?;
    Ok(json(&DatasetSummary {
        dataset: args.tag.to_string(),
        n: args.n,
        n_prime: args.n_prime,
        seed: args.seed,
    }))
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var("RULSIF_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("RULSIF_THREADS must be a positive integer, got '{v}'")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    configure_threads(cli.threads)?;
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Pe(a) => cmd_pe(a),
        Command::Test(a) => cmd_test(a),
        Command::Outlier(a) => cmd_outlier(a),
        Command::Repro(a) => cmd_repro(a),
        Command::Dataset(a) => cmd_dataset(a),
    }
}

/// Runs the command line `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return 0;
            }
            let message = e.to_string();
            let line = message
                .lines()
                .map(|l| l.trim().trim_start_matches("error:").trim())
                .find(|l| !l.is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("error[usage]: {line}");
            return 2;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{out}");
            0
        }
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}
