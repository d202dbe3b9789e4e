//! Desk-scale reproductions of the synthetic experiments as CSV tables.
//!
//! Every experiment is a deterministic function of its options: each
//! (configuration, run) pair draws from its own derived seed and runs are
//! aggregated in index order, so the thread count never changes a byte.

use rayon::prelude::*;

use rulsif::covshift::{covshift_experiment, CovshiftSettings, WeightScheme};
use rulsif::divergence::{estimate, true_pe_oracle};
use rulsif::homogeneity::{lstt, Direction, Refit, TestConfig};
use rulsif::outlier::{auc, outlier_scores};
use rulsif::rng::derive_seed;
use rulsif::stats::Summary;
use rulsif::synthdata::{outlier_dataset, paper_dataset, true_relative_ratio, DatasetTag, OutlierDataset, Scenario};
use rulsif::{fit, RulsifConfig, SampleSet};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    RatioCurves,
    PeConvergence,
    Type1,
    Power,
    OutlierAuc,
    Covshift,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::RatioCurves => "ratio-curves",
            Experiment::PeConvergence => "pe-convergence",
            Experiment::Type1 => "type1",
            Experiment::Power => "power",
            Experiment::OutlierAuc => "outlier-auc",
            Experiment::Covshift => "covshift",
        }
    }

    pub fn default_runs(self) -> usize {
        match self {
            Experiment::RatioCurves => 1,
            Experiment::PeConvergence => 20,
            Experiment::Type1 => 20,
            Experiment::Power => 10,
            Experiment::OutlierAuc => 100,
            Experiment::Covshift => 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproOptions {
    pub runs: Option<usize>,
    pub seed: u64,
    pub permutations: usize,
    pub alphas: Option<Vec<f64>>,
    pub sizes: Option<Vec<usize>>,
    /// Reuse the observed split's width and ridge inside permutations.
    pub fast: bool,
}

impl ReproOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            runs: None,
            seed,
            permutations: 100,
            alphas: None,
            sizes: None,
            fast: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn render(&self) -> String {
        crate::csv::render(&self.header, &self.rows)
    }

    /// Parsed numeric value of `column` in `row`.
    pub fn value(&self, row: usize, column: &str) -> Option<f64> {
        let k = self.header.iter().position(|h| *h == column)?;
        self.rows.get(row)?.get(k)?.parse().ok()
    }
}

const DEFAULT_ALPHAS: [f64; 3] = [0.0, 0.5, 0.95];
const SIGNIFICANCE: f64 = 0.05;

fn stream(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(seed, |s, &p| derive_seed(s, p))
}

fn num(v: f64) -> String {
    v.to_string()
}

pub fn run(experiment: Experiment, opts: &ReproOptions) -> Result<Table, CliError> {
    let runs = opts.runs.unwrap_or(experiment.default_runs());
    if runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    if opts.permutations == 0 {
        return Err(CliError::Usage("--permutations must be at least 1".into()));
    }
    if let Some(a) = &opts.alphas {
        if a.is_empty() {
            return Err(CliError::Usage("--alphas must list at least one value".into()));
        }
    }
    if let Some(s) = &opts.sizes {
        if s.is_empty() || s.iter().any(|&n| n < 10) {
            return Err(CliError::Usage("--sizes must list values of at least 10".into()));
        }
    }
    let alphas = opts.alphas.clone().unwrap_or(DEFAULT_ALPHAS.to_vec());
    match experiment {
        Experiment::RatioCurves => ratio_curves(&alphas, opts.sizes.as_ref().map_or(300, |s| s[0]), runs, opts.seed),
        Experiment::PeConvergence => {
            let sizes = opts.sizes.clone().unwrap_or(vec![125, 250, 500]);
            pe_convergence(&alphas, &sizes, runs, opts.seed)
        }
        Experiment::Type1 => {
            let sizes = opts.sizes.clone().unwrap_or(vec![100]);
            homogeneity("type1", &[DatasetTag::A], &alphas, &sizes, runs, opts)
        }
        Experiment::Power => {
            let sizes = opts.sizes.clone().unwrap_or(vec![100, 300]);
            homogeneity("power", &[DatasetTag::B, DatasetTag::C, DatasetTag::D], &alphas, &sizes, runs, opts)
        }
        Experiment::OutlierAuc => {
            let sizes = opts.sizes.clone().unwrap_or(vec![100]);
            outlier_table(&alphas, sizes[0], runs, opts.seed)
        }
        Experiment::Covshift => {
            let params = opts.alphas.clone().unwrap_or(vec![0.0, 0.25, 0.5, 0.75, 1.0]);
            covshift_table(&params, runs, opts.seed)
        }
    }
}

fn ratio_curves(alphas: &[f64], n: usize, runs: usize, seed: u64) -> Result<Table, CliError> {
    let xs: Vec<f64> = (0..=100).map(|k| -5.0 + 0.1 * k as f64).collect();
    let grid = SampleSet::from_scalars(&xs)?;
    let mut rows = Vec::new();
    for (ti, tag) in DatasetTag::ALL.into_iter().enumerate() {
        for (ai, &alpha) in alphas.iter().enumerate() {
            let estimates: Vec<Vec<f64>> = (0..runs)
                .into_par_iter()
                .map(|r| {
                    let s = stream(seed, &[ti as u64, ai as u64, r as u64]);
                    let data = paper_dataset(tag, n, n, s)?;
                    let model = fit(&data.numerator, &data.denominator, &RulsifConfig::new(alpha).with_seed(derive_seed(s, 2)))?;
                    Ok(model.predict(&grid)?.to_vec())
                })
                .collect::<rulsif::Result<_>>()?;
            let (p, pp) = tag.specs();
            for (k, &x) in xs.iter().enumerate() {
                let at_x: Vec<f64> = estimates.iter().map(|e| e[k]).collect();
                let s = Summary::of(&at_x);
                rows.push(vec![
                    tag.to_string(),
                    num(alpha),
                    num(x),
                    num(true_relative_ratio(&p, &pp, alpha, &[x])?),
                    num(s.mean),
                    num(s.sd),
                    runs.to_string(),
                ]);
            }
        }
    }
    Ok(Table {
        name: "ratio_curves",
        header: vec!["dataset", "alpha", "x", "true_ratio", "mean_estimate", "sd_estimate", "runs"],
        rows,
    })
}

fn pe_convergence(alphas: &[f64], sizes: &[usize], runs: usize, seed: u64) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    for (ti, tag) in DatasetTag::ALL.into_iter().enumerate() {
        let (p, pp) = tag.specs();
        for (ai, &alpha) in alphas.iter().enumerate() {
            let truth = true_pe_oracle(&p, &pp, alpha)?;
            for (si, &n) in sizes.iter().enumerate() {
                let est: Vec<(f64, f64)> = (0..runs)
                    .into_par_iter()
                    .map(|r| {
                        let s = stream(seed, &[ti as u64, ai as u64, si as u64, r as u64]);
                        let data = paper_dataset(tag, n, n, s)?;
                        let model =
                            fit(&data.numerator, &data.denominator, &RulsifConfig::new(alpha).with_seed(derive_seed(s, 2)))?;
                        let e = estimate(&model, &data.numerator, &data.denominator)?;
                        Ok((e.pe_hat, e.pe_tilde))
                    })
                    .collect::<rulsif::Result<_>>()?;
                let hat = Summary::of(&est.iter().map(|e| e.0).collect::<Vec<_>>());
                let tilde = Summary::of(&est.iter().map(|e| e.1).collect::<Vec<_>>());
                rows.push(vec![
                    tag.to_string(),
                    num(alpha),
                    n.to_string(),
                    num(truth),
                    num(hat.mean),
                    num(hat.sd),
                    num(tilde.mean),
                    num(tilde.sd),
                    runs.to_string(),
                ]);
            }
        }
    }
    Ok(Table {
        name: "pe_convergence",
        header: vec![
            "dataset", "alpha", "n", "true_pe", "mean_pe_hat", "sd_pe_hat", "mean_pe_tilde", "sd_pe_tilde", "runs",
        ],
        rows,
    })
}

/// Null-acceptance rates of all three test directions. One adaptive test per
/// trial supplies the plain and reciprocal p-values as well.
fn homogeneity(
    name: &'static str,
    tags: &[DatasetTag],
    alphas: &[f64],
    sizes: &[usize],
    runs: usize,
    opts: &ReproOptions,
) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    for &tag in tags {
        for (ai, &alpha) in alphas.iter().enumerate() {
            for (si, &n) in sizes.iter().enumerate() {
                let outcomes: Vec<[bool; 3]> = (0..runs)
                    .into_par_iter()
                    .map(|r| {
                        let s = stream(opts.seed, &[tag as u64, ai as u64, si as u64, r as u64]);
                        let data = paper_dataset(tag, n, n, s)?;
                        let mut cfg = TestConfig::new(alpha)
                            .with_direction(Direction::Adaptive)
                            .with_permutations(opts.permutations);
                        cfg.significance = SIGNIFICANCE;
                        cfg.rulsif = cfg.rulsif.with_seed(derive_seed(s, 2));
                        if opts.fast {
                            cfg.refit = Refit::FixedParameters;
                        }
                        let out = lstt(&data.numerator, &data.denominator, &cfg, derive_seed(s, 3))?;
                        let accept = |p: f64| p >= SIGNIFICANCE;
                        Ok([
                            accept(out.p_plain.unwrap()),
                            accept(out.p_reciprocal.unwrap()),
                            accept(out.p_value),
                        ])
                    })
                    .collect::<rulsif::Result<_>>()?;
                for (k, direction) in [Direction::Plain, Direction::Reciprocal, Direction::Adaptive].into_iter().enumerate() {
                    let accepted = outcomes.iter().filter(|o| o[k]).count();
                    rows.push(vec![
                        tag.to_string(),
                        num(alpha),
                        n.to_string(),
                        direction.to_string(),
                        opts.permutations.to_string(),
                        num(accepted as f64 / runs as f64),
                        runs.to_string(),
                    ]);
                }
            }
        }
    }
    Ok(Table {
        name,
        header: vec!["dataset", "alpha", "n", "direction", "permutations", "acceptance_rate", "runs"],
        rows,
    })
}

/// Draws an outlier dataset containing at least one outlier, redrawing on a
/// fresh derived seed otherwise.
pub fn outlier_trial_data(d: usize, n: usize, seed: u64) -> rulsif::Result<OutlierDataset> {
    let mut attempt = 0;
    loop {
        let data = outlier_dataset(d, n, n, derive_seed(seed, attempt))?;
        if data.labels.iter().any(|&l| l) {
            return Ok(data);
        }
        attempt += 1;
    }
}

/// AUC of one outlier-benchmark trial.
pub fn outlier_trial_auc(d: usize, n: usize, alpha: f64, seed: u64) -> rulsif::Result<f64> {
    let data = outlier_trial_data(d, n, seed)?;
    let scores = outlier_scores(&data.model, &data.evaluation, &RulsifConfig::new(alpha).with_seed(derive_seed(seed, u64::MAX)))?;
    auc(&scores.with_labels(data.labels)?)
}

fn outlier_table(alphas: &[f64], n: usize, runs: usize, seed: u64) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    for d in [1usize, 5, 10] {
        for (ai, &alpha) in alphas.iter().enumerate() {
            let aucs: Vec<f64> = (0..runs)
                .into_par_iter()
                .map(|r| outlier_trial_auc(d, n, alpha, stream(seed, &[d as u64, ai as u64, r as u64])))
                .collect::<rulsif::Result<_>>()?;
            let s = Summary::of(&aucs);
            rows.push(vec![d.to_string(), num(alpha), n.to_string(), num(s.mean), num(s.sd), runs.to_string()]);
        }
    }
    Ok(Table {
        name: "outlier_auc",
        header: vec!["dim", "alpha", "n", "mean_auc", "sd_auc", "runs"],
        rows,
    })
}

fn covshift_table(params: &[f64], runs: usize, seed: u64) -> Result<Table, CliError> {
    let mut schemes = Vec::new();
    for &p in params {
        schemes.push(WeightScheme::riw(p)?);
    }
    for &p in params {
        schemes.push(WeightScheme::eiw(p)?);
    }
    let settings = CovshiftSettings::default();
    let mut rows = Vec::new();
    for (si, scenario) in [Scenario::NoShift, Scenario::Shift].into_iter().enumerate() {
        for row in covshift_experiment(scenario, &schemes, runs, stream(seed, &[si as u64]), &settings)? {
            rows.push(vec![
                scenario.to_string(),
                row.scheme.name().to_string(),
                num(row.scheme.param),
                num(row.mean_mse),
                num(row.sd_mse),
                row.runs.to_string(),
            ]);
        }
    }
    Ok(Table {
        name: "covshift",
        header: vec!["scenario", "scheme", "param", "mean_mse", "sd_mse", "runs"],
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_run_tables_have_one_row_per_configuration() {
        let mut opts = ReproOptions::new(3);
        opts.runs = Some(1);
        opts.alphas = Some(vec![0.5]);
        let t = run(Experiment::OutlierAuc, &opts).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.value(0, "sd_auc"), Some(0.0));
        opts.sizes = Some(vec![40]);
        let t = run(Experiment::PeConvergence, &opts).unwrap();
        assert_eq!(t.rows.len(), 5);
        assert!(t.rows.iter().all(|r| r.len() == t.header.len()));
    }

    #[test]
    fn rejects_bad_options() {
        let mut opts = ReproOptions::new(0);
        opts.runs = Some(0);
        assert!(matches!(run(Experiment::Covshift, &opts), Err(CliError::Usage(_))));
        opts.runs = Some(1);
        opts.sizes = Some(vec![3]);
        assert!(matches!(run(Experiment::Type1, &opts), Err(CliError::Usage(_))));
    }

    #[test]
    fn outlier_trials_always_contain_outliers() {
        for s in 0..300 {
            assert!(outlier_trial_data(1, 20, s).unwrap().labels.iter().any(|&l| l));
        }
    }
}
