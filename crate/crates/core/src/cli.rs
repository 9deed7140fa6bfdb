//! Command-line interface: fit and predict on CSV data, bandwidth
//! cross-validation, lagged design construction, and the synthetic
//! benchmark.
//!
//! Option precedence everywhere: command-line flag, then `key = value` pairs
//! from `--config` (keys mirror the long flag names), then built-in defaults.
//! The master seed may additionally come from the `CORR_ARD_SEED` environment
//! variable, which sits between the config file and the default.
//!
//! Exit codes: 0 success, 2 malformed input or flags, 3 every feature pruned,
//! 4 numerical failure, 5 benchmark with no successful cell.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use ndarray::{Array1, Array2, Axis};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bandwidth::{
    cv_table_csv, select_bandwidth, select_bandwidth_holdout, BandwidthGrid, CvLayout, CvRow,
    SelectionMetric,
};
use crate::bench::{
    results_csv, run_monte_carlo, summary_csv, BandwidthSelection, BenchConfig, SyntheticSpec,
};
use crate::data::{
    build_lagged_design, fmt_g17, load_dataset_csv, load_series_csv, load_target_csv,
    normalize_target_01, read_csv_table, standardize, write_dataset_csv, Dataset, LagSpec,
    StandardizationParams,
};
use crate::error::{Error, Result};
use crate::lsr_ard::{fit_lsr_ard, LsrArdConfig};
use crate::mcr_ard::{fit_mcr_ard, HessianMode, McrArdConfig};
use crate::metrics;
use crate::model::{Algorithm, FittedModel, ModelFile};
use crate::seed::{derive_seed, stream};

pub const DEFAULT_MASTER_SEED: u64 = 42;
pub const SEED_ENV_VAR: &str = "CORR_ARD_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "corr-ard",
    version,
    about = "Robust sparse Bayesian regression with a correntropy likelihood"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a sparse regression model on a CSV dataset
    Fit(FitArgs),
    /// Predict with a fitted model; scores when the truth column is present
    Predict(PredictArgs),
    /// Run the synthetic corrupted-covariate benchmark
    Bench(BenchArgs),
    /// Select the kernel bandwidth on a training CSV
    Cv(CvArgs),
    /// Expand a multichannel time series into a lagged design CSV
    Lagged(LaggedArgs),
}

#[derive(Args, Debug, Default)]
pub struct FitArgs {
    /// Algorithm: lsr-ard or mcr-ard
    #[arg(long)]
    pub algo: Option<String>,
    /// Training CSV (header row, target in --target-col)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub target_col: Option<String>,
    /// Fixed kernel bandwidth (mcr-ard)
    #[arg(long)]
    pub h: Option<f64>,
    /// Select the bandwidth by cross-validation (mcr-ard)
    #[arg(long)]
    pub cv_h: bool,
    #[arg(long)]
    pub grid_lo: Option<f64>,
    #[arg(long)]
    pub grid_hi: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Holdout validation fraction; replaces k-fold bandwidth selection
    #[arg(long)]
    pub holdout: Option<f64>,
    /// Bandwidth selection metric: correlation or rmse
    #[arg(long)]
    pub metric: Option<String>,
    /// Relevance pruning threshold
    #[arg(long)]
    pub a_max: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub w_tol: Option<f64>,
    #[arg(long)]
    pub fp_tol: Option<f64>,
    #[arg(long)]
    pub max_fp_iters: Option<usize>,
    /// Curvature policy for the Laplace step: exact or gauss
    #[arg(long)]
    pub hessian_mode: Option<String>,
    #[arg(long)]
    pub sigma2_floor: Option<f64>,
    /// Append a constant-1 column that is excluded from pruning
    #[arg(long)]
    pub intercept: bool,
    /// Skip covariate standardization
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key=value config file; keys mirror the long flag names
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// model.json written by `fit`
    #[arg(long)]
    pub model: PathBuf,
    /// Covariate CSV; may include the truth column
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub target_col: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct BenchArgs {
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated corruption proportions, e.g. 0,0.1,0.3
    #[arg(long)]
    pub proportions: Option<String>,
    /// Comma-separated Laplace scales, e.g. 0.2,1.0
    #[arg(long)]
    pub scales: Option<String>,
    /// Skip bandwidth cross-validation and use this fixed h
    #[arg(long)]
    pub fixed_h: Option<f64>,
    /// Keep one solution vector across repetitions
    #[arg(long)]
    pub fix_solution: bool,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n_relevant: Option<usize>,
    #[arg(long)]
    pub grid_lo: Option<f64>,
    #[arg(long)]
    pub grid_hi: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub metric: Option<String>,
    /// Comma-separated algorithms to run
    #[arg(long)]
    pub algos: Option<String>,
    #[arg(long)]
    pub a_max: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub target_col: Option<String>,
    #[arg(long)]
    pub grid_lo: Option<f64>,
    #[arg(long)]
    pub grid_hi: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Holdout validation fraction; replaces k-fold selection
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub a_max: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub hessian_mode: Option<String>,
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LaggedArgs {
    /// Time-series CSV: time_index column plus one column per source
    #[arg(long)]
    pub series: PathBuf,
    /// Target CSV aligned with the series
    #[arg(long)]
    pub target: PathBuf,
    /// Window length in samples, current sample included
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Rescale the target into [0,1] before writing
    #[arg(long)]
    pub normalize_target: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// key=value pairs loaded from `--config`.
#[derive(Default)]
struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)?;
        let mut map = BTreeMap::new();
        for (ix, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::InvalidInput(format!(
                    "config line {}: expected key=value, got `{raw}`",
                    ix + 1
                )));
            };
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidInput(format!("config key `{key}`: cannot parse `{raw}`"))
            }),
        }
    }
}

fn pick<T: std::str::FromStr>(cli: Option<T>, cfg: &FileConfig, key: &str, default: T) -> Result<T> {
    match cli {
        Some(v) => Ok(v),
        None => Ok(cfg.get(key)?.unwrap_or(default)),
    }
}

fn pick_opt<T: std::str::FromStr>(cli: Option<T>, cfg: &FileConfig, key: &str) -> Result<Option<T>> {
    match cli {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

fn pick_flag(cli: bool, cfg: &FileConfig, key: &str) -> Result<bool> {
    if cli {
        Ok(true)
    } else {
        Ok(cfg.get::<bool>(key)?.unwrap_or(false))
    }
}

fn resolve_seed(cli: Option<u64>, cfg: &FileConfig) -> Result<u64> {
    if let Some(s) = cli {
        return Ok(s);
    }
    if let Some(s) = cfg.get::<u64>("seed")? {
        return Ok(s);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::InvalidInput(format!("{SEED_ENV_VAR} must be an unsigned integer, got `{v}`"))
        }),
        Err(_) => Ok(DEFAULT_MASTER_SEED),
    }
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("{what}: cannot parse `{p}`")))
        })
        .collect()
}

/// Written next to every command's outputs. Timestamps live here and only
/// here; the CSV outputs must be reproducible byte for byte.
#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub master_seed: Option<u64>,
    pub config: serde_json::Value,
    pub input_digests: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Lagged(a) => cmd_lagged(a),
    }
}

/// Exit-code taxonomy: input errors are distinguishable from numerical ones.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::AllFeaturesPruned => 3,
        Error::NotSpd(_) => 4,
        _ => 2,
    }
}

fn identity_params(d: usize) -> StandardizationParams {
    StandardizationParams { means: vec![0.0; d], scales: vec![1.0; d] }
}

fn append_intercept_column(data: &Dataset) -> Result<Dataset> {
    let ones = Array2::<f64>::ones((data.n_samples(), 1));
    let x = ndarray::concatenate(Axis(1), &[data.x.view(), ones.view()])
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let names = data.feature_names.clone().map(|mut n| {
        n.push("(intercept)".to_string());
        n
    });
    Dataset::with_names(x, data.t.clone(), names)
}

#[derive(Serialize, Clone)]
struct BandwidthSearchSettings {
    grid: BandwidthGrid,
    folds: usize,
    holdout: Option<f64>,
    metric: SelectionMetric,
    seed: u64,
}

fn run_bandwidth_search(
    data: &Dataset,
    settings: &BandwidthSearchSettings,
    base: &McrArdConfig,
) -> Result<(f64, Vec<CvRow>)> {
    match settings.holdout {
        Some(frac) => select_bandwidth_holdout(
            data,
            &settings.grid,
            frac,
            settings.seed,
            settings.metric,
            base,
        ),
        None => {
            let cv = CvLayout {
                n_folds: settings.folds,
                seed: settings.seed,
                metric: settings.metric,
            };
            select_bandwidth(data, &settings.grid, &cv, base)
        }
    }
}

#[derive(Serialize)]
struct FitReport<'a> {
    algorithm: &'a str,
    n_samples: usize,
    n_features: usize,
    n_active: usize,
    n_iters: usize,
    bandwidth: Option<f64>,
    noise_variance: Option<f64>,
    active_indices: Vec<usize>,
    objective_trace: &'a [f64],
}

#[derive(Serialize)]
struct ResolvedFitConfig {
    algorithm: String,
    input: String,
    target_col: String,
    standardize: bool,
    intercept: bool,
    bandwidth: Option<f64>,
    cv_h: bool,
    search: Option<BandwidthSearchSettings>,
    lsr: Option<LsrArdConfig>,
    mcr: Option<McrArdConfig>,
    out_dir: String,
}

fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let started = unix_now();
    let cfgf = FileConfig::load(args.config.as_deref())?;

    let algo_name = match (&args.algo, cfgf.get::<String>("algo")?) {
        (Some(a), _) => a.clone(),
        (None, Some(a)) => a,
        (None, None) => {
            return Err(Error::InvalidInput(
                "--algo is required (lsr-ard or mcr-ard)".into(),
            ))
        }
    };
    let algorithm = Algorithm::parse(&algo_name)?;
    let target_col = pick(args.target_col.clone(), &cfgf, "target-col", "target".into())?;
    let out_dir = pick(args.out.clone(), &cfgf, "out", PathBuf::from("."))?;
    let seed = resolve_seed(args.seed, &cfgf)?;
    let no_standardize = pick_flag(args.no_standardize, &cfgf, "no-standardize")?;
    let intercept = pick_flag(args.intercept, &cfgf, "intercept")?;
    let cv_h = pick_flag(args.cv_h, &cfgf, "cv-h")?;
    let h_flag = pick_opt(args.h, &cfgf, "h")?;

    let a_max = pick(args.a_max, &cfgf, "a-max", 1e6)?;
    let max_iters = pick(args.max_iters, &cfgf, "max-iters", 500)?;
    let w_tol = pick(args.w_tol, &cfgf, "w-tol", 1e-6)?;
    let fp_tol = pick(args.fp_tol, &cfgf, "fp-tol", 1e-6)?;
    let max_fp_iters = pick(args.max_fp_iters, &cfgf, "max-fp-iters", 50)?;
    let sigma2_floor = pick(args.sigma2_floor, &cfgf, "sigma2-floor", 1e-12)?;
    let hessian_mode =
        HessianMode::parse(&pick(args.hessian_mode.clone(), &cfgf, "hessian-mode", "exact".into())?)?;

    let raw = load_dataset_csv(&args.input, &target_col)?;
    let feature_names = raw
        .feature_names
        .clone()
        .expect("csv loader always names features");
    let (mut fit_data, params) = if no_standardize {
        (raw.clone(), identity_params(raw.n_features()))
    } else {
        standardize(&raw)?
    };
    let prune_exempt = if intercept {
        fit_data = append_intercept_column(&fit_data)?;
        Some(fit_data.n_features() - 1)
    } else {
        None
    };

    fs::create_dir_all(&out_dir)?;

    let mut search_settings = None;
    let mut lsr_cfg = None;
    let mut mcr_cfg = None;
    let model: FittedModel = match algorithm {
        Algorithm::LsrArd => {
            let cfg = LsrArdConfig {
                prune_threshold: a_max,
                max_iters,
                w_tol,
                sigma2_floor,
                fixed_noise_variance: None,
                prune_exempt,
            };
            lsr_cfg = Some(cfg.clone());
            fit_lsr_ard(&fit_data, &cfg)?
        }
        Algorithm::McrArd => {
            let base = McrArdConfig {
                prune_threshold: a_max,
                max_outer_iters: max_iters,
                max_fp_iters,
                fp_tol,
                w_tol,
                hessian_mode,
                prune_exempt,
                ..McrArdConfig::new(1.0)
            };
            let h = match (h_flag, cv_h) {
                (Some(_), true) => {
                    return Err(Error::InvalidInput(
                        "--h and --cv-h are mutually exclusive".into(),
                    ))
                }
                (Some(h), false) => h,
                (None, true) => {
                    let settings = BandwidthSearchSettings {
                        grid: BandwidthGrid {
                            lo: pick(args.grid_lo, &cfgf, "grid-lo", 1.0)?,
                            hi: pick(args.grid_hi, &cfgf, "grid-hi", 1000.0)?,
                            n_points: pick(args.grid_n, &cfgf, "grid-n", 30)?,
                        },
                        folds: pick(args.folds, &cfgf, "folds", 5)?,
                        holdout: pick_opt(args.holdout, &cfgf, "holdout")?,
                        metric: SelectionMetric::parse(&pick(
                            args.metric.clone(),
                            &cfgf,
                            "metric",
                            "correlation".into(),
                        )?)?,
                        seed: derive_seed(seed, &[stream::CV_FOLDS]),
                    };
                    let (h, rows) = run_bandwidth_search(&fit_data, &settings, &base)?;
                    fs::write(out_dir.join("cv_table.csv"), cv_table_csv(&rows)?)?;
                    search_settings = Some(settings);
                    h
                }
                (None, false) => {
                    return Err(Error::InvalidInput(
                        "mcr-ard needs either --h <value> or --cv-h".into(),
                    ))
                }
            };
            let cfg = McrArdConfig { bandwidth: h, ..base };
            mcr_cfg = Some(cfg.clone());
            fit_mcr_ard(&fit_data, &cfg)?
        }
    };

    let model_file = ModelFile::from_fit(&model, &params, feature_names, intercept)?;
    write_json(&out_dir.join("model.json"), &model_file)?;
    write_json(
        &out_dir.join("fit_report.json"),
        &FitReport {
            algorithm: algorithm.name(),
            n_samples: fit_data.n_samples(),
            n_features: fit_data.n_features(),
            n_active: model.n_active(),
            n_iters: model.n_iters,
            bandwidth: model.bandwidth,
            noise_variance: model.noise_variance,
            active_indices: model.active_indices(),
            objective_trace: &model.objective_trace,
        },
    )?;

    let mut outputs = vec!["model.json".into(), "fit_report.json".into()];
    if search_settings.is_some() {
        outputs.push("cv_table.csv".into());
    }
    let config = ResolvedFitConfig {
        algorithm: algorithm.name().into(),
        input: args.input.display().to_string(),
        target_col,
        standardize: !no_standardize,
        intercept,
        bandwidth: model.bandwidth,
        cv_h,
        search: search_settings,
        lsr: lsr_cfg,
        mcr: mcr_cfg,
        out_dir: out_dir.display().to_string(),
    };
    let mut digests = BTreeMap::new();
    digests.insert(args.input.display().to_string(), sha256_hex(&args.input)?);
    write_manifest(
        &out_dir,
        &RunManifest {
            command: "fit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            master_seed: Some(seed),
            config: serde_json::to_value(&config)?,
            input_digests: digests,
            outputs,
            started_unix: started,
            finished_unix: unix_now(),
        },
    )?;

    println!(
        "fitted {}: {} of {} features active after {} iterations{}",
        algorithm.name(),
        model.n_active(),
        fit_data.n_features(),
        model.n_iters,
        model
            .bandwidth
            .map(|h| format!(", bandwidth {h}"))
            .unwrap_or_default()
    );
    Ok(0)
}

#[derive(Serialize)]
struct PredictionMetrics {
    correlation: Option<f64>,
    rmse: f64,
    n_samples: usize,
}

fn cmd_predict(args: &PredictArgs) -> Result<i32> {
    let started = unix_now();
    let cfgf = FileConfig::load(args.config.as_deref())?;
    let target_col = pick(args.target_col.clone(), &cfgf, "target-col", "target".into())?;
    let out_dir = pick(args.out.clone(), &cfgf, "out", PathBuf::from("."))?;

    let model: ModelFile = serde_json::from_str(&fs::read_to_string(&args.model)?)?;
    let (headers, rows, _) = read_csv_table(&args.input)?;

    // Columns are matched by name; anything unexpected is an error so silent
    // misalignment cannot happen.
    let mut missing = Vec::new();
    let mut col_ix = Vec::with_capacity(model.feature_names.len());
    for name in &model.feature_names {
        match headers.iter().position(|h| h == name) {
            Some(ix) => col_ix.push(ix),
            None => missing.push(name.clone()),
        }
    }
    let extra: Vec<String> = headers
        .iter()
        .filter(|h| *h != &target_col && !model.feature_names.contains(h))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::InvalidInput(format!(
            "feature mismatch with model: missing [{}]; unexpected [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }

    let n = rows.len();
    let d = col_ix.len();
    let mut x = Array2::<f64>::zeros((n, d));
    for (i, row) in rows.iter().enumerate() {
        for (k, &ix) in col_ix.iter().enumerate() {
            x[[i, k]] = row[ix];
        }
    }
    let truth = headers
        .iter()
        .position(|h| h == &target_col)
        .map(|ix| Array1::from_iter(rows.iter().map(|r| r[ix])));

    let pred = model.predict_raw(&x)?;

    fs::create_dir_all(&out_dir)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["prediction"])?;
    for p in pred.iter() {
        w.write_record([fmt_g17(*p)])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(out_dir.join("predictions.csv"), bytes)?;

    let mut outputs = vec!["predictions.csv".into()];
    if let Some(truth) = &truth {
        let correlation = match metrics::correlation(&pred, truth) {
            Ok(c) => Some(c),
            Err(Error::UndefinedCorrelation) => None,
            Err(e) => return Err(e),
        };
        let rmse = metrics::rmse(&pred, truth)?;
        write_json(
            &out_dir.join("metrics.json"),
            &PredictionMetrics { correlation, rmse, n_samples: n },
        )?;
        outputs.push("metrics.json".into());
    }

    let mut digests = BTreeMap::new();
    digests.insert(args.input.display().to_string(), sha256_hex(&args.input)?);
    digests.insert(args.model.display().to_string(), sha256_hex(&args.model)?);
    write_manifest(
        &out_dir,
        &RunManifest {
            command: "predict".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            master_seed: None,
            config: serde_json::json!({
                "model": args.model.display().to_string(),
                "input": args.input.display().to_string(),
                "target_col": target_col,
                "truth_present": truth.is_some(),
                "out_dir": out_dir.display().to_string(),
            }),
            input_digests: digests,
            outputs,
            started_unix: started,
            finished_unix: unix_now(),
        },
    )?;
    println!("wrote predictions for {n} samples");
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let started = unix_now();
    let cfgf = FileConfig::load(args.config.as_deref())?;
    let out_dir = pick(args.out.clone(), &cfgf, "out", PathBuf::from("."))?;
    let seed = resolve_seed(args.seed, &cfgf)?;

    let proportions = match pick_opt(args.proportions.clone(), &cfgf, "proportions")? {
        Some(s) => parse_f64_list(&s, "--proportions")?,
        None => crate::bench::default_proportions(),
    };
    let scales = match pick_opt(args.scales.clone(), &cfgf, "scales")? {
        Some(s) => parse_f64_list(&s, "--scales")?,
        None => crate::bench::default_scales(),
    };
    let algorithms = match pick_opt(args.algos.clone(), &cfgf, "algos")? {
        Some(s) => s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(Algorithm::parse)
            .collect::<Result<Vec<_>>>()?,
        None => vec![Algorithm::LsrArd, Algorithm::McrArd],
    };

    let fixed_h = pick_opt(args.fixed_h, &cfgf, "fixed-h")?;
    let selection = match fixed_h {
        Some(h) => BandwidthSelection::Fixed(h),
        None => BandwidthSelection::CrossValidated {
            grid: BandwidthGrid {
                lo: pick(args.grid_lo, &cfgf, "grid-lo", 1.0)?,
                hi: pick(args.grid_hi, &cfgf, "grid-hi", 1000.0)?,
                n_points: pick(args.grid_n, &cfgf, "grid-n", 30)?,
            },
            n_folds: pick(args.folds, &cfgf, "folds", 5)?,
            metric: SelectionMetric::parse(&pick(
                args.metric.clone(),
                &cfgf,
                "metric",
                "correlation".into(),
            )?)?,
        },
    };

    let a_max = pick(args.a_max, &cfgf, "a-max", 1e6)?;
    let max_iters = pick(args.max_iters, &cfgf, "max-iters", 500)?;
    let cfg = BenchConfig {
        synthetic: SyntheticSpec {
            n_train: pick(args.n_train, &cfgf, "n-train", 300)?,
            n_test: pick(args.n_test, &cfgf, "n-test", 300)?,
            dim: pick(args.dim, &cfgf, "dim", 500)?,
            n_relevant: pick(args.n_relevant, &cfgf, "n-relevant", 30)?,
            seed: 0,
        },
        proportions,
        scales,
        reps: pick(args.reps, &cfgf, "reps", 100)?,
        algorithms,
        selection,
        fix_solution: pick_flag(args.fix_solution, &cfgf, "fix-solution")?,
        master_seed: seed,
        jobs: pick_opt(args.jobs, &cfgf, "jobs")?,
        lsr: LsrArdConfig {
            prune_threshold: a_max,
            max_iters,
            ..LsrArdConfig::default()
        },
        mcr: McrArdConfig {
            prune_threshold: a_max,
            max_outer_iters: max_iters,
            ..McrArdConfig::new(1.0)
        },
    };

    let outcome = run_monte_carlo(&cfg)?;

    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("bench_results.csv"), results_csv(&outcome.cells)?)?;
    fs::write(out_dir.join("bench_summary.csv"), summary_csv(&outcome.summary)?)?;
    write_manifest(
        &out_dir,
        &RunManifest {
            command: "bench".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            master_seed: Some(seed),
            config: serde_json::to_value(&cfg)?,
            input_digests: BTreeMap::new(),
            outputs: vec!["bench_results.csv".into(), "bench_summary.csv".into()],
            started_unix: started,
            finished_unix: unix_now(),
        },
    )?;

    println!(
        "bench finished: {} cells ok, {} failed; results in {}",
        outcome.n_ok,
        outcome.n_failed,
        out_dir.display()
    );
    if outcome.n_ok == 0 {
        eprintln!("error: every benchmark cell failed");
        return Ok(5);
    }
    Ok(0)
}

fn cmd_cv(args: &CvArgs) -> Result<i32> {
    let started = unix_now();
    let cfgf = FileConfig::load(args.config.as_deref())?;
    let target_col = pick(args.target_col.clone(), &cfgf, "target-col", "target".into())?;
    let out_dir = pick(args.out.clone(), &cfgf, "out", PathBuf::from("."))?;
    let seed = resolve_seed(args.seed, &cfgf)?;
    let no_standardize = pick_flag(args.no_standardize, &cfgf, "no-standardize")?;

    let raw = load_dataset_csv(&args.input, &target_col)?;
    let data = if no_standardize { raw } else { standardize(&raw)?.0 };

    let settings = BandwidthSearchSettings {
        grid: BandwidthGrid {
            lo: pick(args.grid_lo, &cfgf, "grid-lo", 1.0)?,
            hi: pick(args.grid_hi, &cfgf, "grid-hi", 1000.0)?,
            n_points: pick(args.grid_n, &cfgf, "grid-n", 30)?,
        },
        folds: pick(args.folds, &cfgf, "folds", 5)?,
        holdout: pick_opt(args.holdout, &cfgf, "holdout")?,
        metric: SelectionMetric::parse(&pick(
            args.metric.clone(),
            &cfgf,
            "metric",
            "correlation".into(),
        )?)?,
        seed: derive_seed(seed, &[stream::CV_FOLDS]),
    };
    let base = McrArdConfig {
        prune_threshold: pick(args.a_max, &cfgf, "a-max", 1e6)?,
        max_outer_iters: pick(args.max_iters, &cfgf, "max-iters", 500)?,
        hessian_mode: HessianMode::parse(&pick(
            args.hessian_mode.clone(),
            &cfgf,
            "hessian-mode",
            "exact".into(),
        )?)?,
        ..McrArdConfig::new(1.0)
    };

    let (h, rows) = run_bandwidth_search(&data, &settings, &base)?;

    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("cv_table.csv"), cv_table_csv(&rows)?)?;
    let mut digests = BTreeMap::new();
    digests.insert(args.input.display().to_string(), sha256_hex(&args.input)?);
    write_manifest(
        &out_dir,
        &RunManifest {
            command: "cv".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            master_seed: Some(seed),
            config: serde_json::json!({
                "input": args.input.display().to_string(),
                "target_col": target_col,
                "standardize": !no_standardize,
                "search": serde_json::to_value(&settings)?,
                "estimator": serde_json::to_value(&base)?,
                "out_dir": out_dir.display().to_string(),
            }),
            input_digests: digests,
            outputs: vec!["cv_table.csv".into()],
            started_unix: started,
            finished_unix: unix_now(),
        },
    )?;

    println!("{h}");
    Ok(0)
}

fn cmd_lagged(args: &LaggedArgs) -> Result<i32> {
    let started = unix_now();
    let cfgf = FileConfig::load(args.config.as_deref())?;
    let out_dir = pick(args.out.clone(), &cfgf, "out", PathBuf::from("."))?;
    let spec = LagSpec {
        n_lags: pick(args.lags, &cfgf, "lags", 21)?,
        stride: pick(args.stride, &cfgf, "stride", 1)?,
    };
    let normalize = pick_flag(args.normalize_target, &cfgf, "normalize-target")?;

    let (series, source_names) = load_series_csv(&args.series)?;
    let target = load_target_csv(&args.target)?;
    let mut design = build_lagged_design(&series, &target, &spec)?;

    let mut norm_bounds = None;
    if normalize {
        let (t, min, max) = normalize_target_01(&design.t)?;
        design.t = t;
        norm_bounds = Some((min, max));
    }

    fs::create_dir_all(&out_dir)?;
    write_dataset_csv(&out_dir.join("design.csv"), &design, "target")?;

    let mut digests = BTreeMap::new();
    digests.insert(args.series.display().to_string(), sha256_hex(&args.series)?);
    digests.insert(args.target.display().to_string(), sha256_hex(&args.target)?);
    write_manifest(
        &out_dir,
        &RunManifest {
            command: "lagged".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            master_seed: None,
            config: serde_json::json!({
                "series": args.series.display().to_string(),
                "target": args.target.display().to_string(),
                "n_lags": spec.n_lags,
                "stride": spec.stride,
                "n_sources": source_names.len(),
                "source_names": source_names,
                "normalize_target": normalize,
                "target_bounds": norm_bounds.map(|(lo, hi)| serde_json::json!({"min": lo, "max": hi})),
                "out_dir": out_dir.display().to_string(),
            }),
            input_digests: digests,
            outputs: vec!["design.csv".into()],
            started_unix: started,
            finished_unix: unix_now(),
        },
    )?;

    println!(
        "wrote design.csv: {} rows, {} covariates ({} sources x {} lags)",
        design.n_samples(),
        design.n_features(),
        source_names.len(),
        spec.n_lags
    );
    Ok(0)
}
