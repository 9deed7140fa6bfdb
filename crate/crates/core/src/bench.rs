//! Synthetic benchmark: sparse linear ground truth, arbitrary covariate
//! corruption with Laplace noise, and a seeded Monte-Carlo sweep comparing
//! both estimators on clean test data.

use std::collections::BTreeSet;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{select_bandwidth, BandwidthGrid, CvLayout, SelectionMetric};
use crate::data::{standardize, Dataset};
use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::lsr_ard::{fit_lsr_ard, LsrArdConfig};
use crate::mcr_ard::{fit_mcr_ard, McrArdConfig};
use crate::metrics;
use crate::model::{predict, Algorithm};
use crate::seed::{derive_seed, stream};

/// Shape of the synthetic problem: i.i.d. standard-normal covariates and a
/// sparse solution whose nonzero entries sit on the first `n_relevant`
/// coordinates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    pub n_relevant: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { n_train: 300, n_test: 300, dim: 500, n_relevant: 30, seed: 0 }
    }
}

/// Cell-level contamination: a fraction of covariate cells receives additive
/// zero-mean Laplace noise. Targets and test data are never touched.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub proportion: f64,
    pub laplace_scale: f64,
    pub seed: u64,
}

/// Corruption proportions used by the full sweep: 0 to 1 in steps of 0.1.
pub fn default_proportions() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Laplace scale parameters used by the full sweep.
pub fn default_scales() -> Vec<f64> {
    vec![0.2, 0.3, 0.5, 0.7, 1.0, 1.2, 1.5]
}

/// Draw train and test sets plus the sparse ground truth. Deterministic per
/// seed: solution entries first, then the train matrix, then the test matrix.
pub fn generate(
    spec: &SyntheticSpec,
) -> Result<(Dataset, Dataset, DenseVector, BTreeSet<usize>)> {
    generate_with_solution(spec, None)
}

/// Like [`generate`], but reuse a previously drawn solution vector (the
/// sweep's `--fix-solution` mode). The per-seed draw order is preserved by
/// consuming the same number of samples either way.
pub fn generate_with_solution(
    spec: &SyntheticSpec,
    solution: Option<&DenseVector>,
) -> Result<(Dataset, Dataset, DenseVector, BTreeSet<usize>)> {
    if spec.n_relevant > spec.dim {
        return Err(Error::InvalidInput(format!(
            "n_relevant {} exceeds dimension {}",
            spec.n_relevant, spec.dim
        )));
    }
    if spec.n_train < 1 || spec.n_test < 1 || spec.dim < 1 {
        return Err(Error::InvalidInput("synthetic sizes must be at least 1".into()));
    }
    if let Some(w) = solution {
        if w.len() != spec.dim {
            return Err(Error::DimensionMismatch {
                what: "fixed solution vector",
                expected: spec.dim,
                got: w.len(),
            });
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let drawn = {
        let mut w = Array1::<f64>::zeros(spec.dim);
        for i in 0..spec.n_relevant {
            w[i] = StandardNormal.sample(&mut rng);
        }
        w
    };
    let w_true = solution.cloned().unwrap_or(drawn);
    let x_train =
        Array2::from_shape_fn((spec.n_train, spec.dim), |_| StandardNormal.sample(&mut rng));
    let x_test =
        Array2::from_shape_fn((spec.n_test, spec.dim), |_| StandardNormal.sample(&mut rng));
    let t_train = x_train.dot(&w_true);
    let t_test = x_test.dot(&w_true);
    let relevant: BTreeSet<usize> = w_true
        .iter()
        .enumerate()
        .filter_map(|(i, &w)| (w != 0.0).then_some(i))
        .collect();
    Ok((
        Dataset::new(x_train, t_train)?,
        Dataset::new(x_test, t_test)?,
        w_true,
        relevant,
    ))
}

/// Zero-mean Laplace draw from a uniform sample via the inverse CDF.
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    let v = u - 0.5;
    // Guard against ln(0) when u sits exactly on an endpoint.
    let inner = (1.0 - 2.0 * v.abs()).max(f64::MIN_POSITIVE);
    -scale * v.signum() * inner.ln()
}

/// Add Laplace noise to `round(proportion·N·D)` distinct covariate cells,
/// chosen uniformly at random. Targets are returned unchanged.
pub fn corrupt_covariates(train: &Dataset, spec: &CorruptionSpec) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&spec.proportion) {
        return Err(Error::InvalidInput(format!(
            "corruption proportion must lie in [0,1], got {}",
            spec.proportion
        )));
    }
    if !(spec.laplace_scale > 0.0) {
        return Err(Error::InvalidInput(format!(
            "laplace scale must be positive, got {}",
            spec.laplace_scale
        )));
    }
    let n = train.n_samples();
    let d = train.n_features();
    let total = n * d;
    let count = (spec.proportion * total as f64).round() as usize;
    let mut x = train.x.clone();
    if count > 0 {
        let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
        let cells = rand::seq::index::sample(&mut rng, total, count);
        for flat in cells.iter() {
            let (i, j) = (flat / d, flat % d);
            let u: f64 = rng.random();
            x[[i, j]] += laplace_from_uniform(u, spec.laplace_scale);
        }
    }
    Dataset::with_names(x, train.t.clone(), train.feature_names.clone())
}

/// How the sweep picks the correntropy bandwidth for each cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BandwidthSelection {
    CrossValidated {
        grid: BandwidthGrid,
        n_folds: usize,
        metric: SelectionMetric,
    },
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchConfig {
    pub synthetic: SyntheticSpec,
    pub proportions: Vec<f64>,
    pub scales: Vec<f64>,
    pub reps: usize,
    pub algorithms: Vec<Algorithm>,
    pub selection: BandwidthSelection,
    /// Keep one solution vector across repetitions instead of redrawing.
    pub fix_solution: bool,
    pub master_seed: u64,
    /// Worker threads for the sweep; `None` uses available parallelism.
    pub jobs: Option<usize>,
    pub lsr: LsrArdConfig,
    pub mcr: McrArdConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            synthetic: SyntheticSpec::default(),
            proportions: default_proportions(),
            scales: default_scales(),
            reps: 100,
            algorithms: vec![Algorithm::LsrArd, Algorithm::McrArd],
            selection: BandwidthSelection::CrossValidated {
                grid: BandwidthGrid::default(),
                n_folds: 5,
                metric: SelectionMetric::Correlation,
            },
            fix_solution: false,
            master_seed: 42,
            jobs: None,
            lsr: LsrArdConfig::default(),
            mcr: McrArdConfig::new(1.0),
        }
    }
}

/// One (algorithm, proportion, scale, repetition) outcome. Metric fields are
/// `None` when the fit failed or the metric is undefined; `error` carries the
/// failure tag. Wall time stays out of the CSV exports so reruns are
/// byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub algorithm: Algorithm,
    pub proportion_ix: usize,
    pub proportion: f64,
    pub scale_ix: usize,
    pub scale: f64,
    pub rep: usize,
    pub cell_seed: u64,
    pub selected_h: Option<f64>,
    pub correlation: Option<f64>,
    pub rmse: Option<f64>,
    pub n_selected: Option<usize>,
    pub recall: Option<f64>,
    pub error: Option<String>,
    pub wall_secs: f64,
}

/// Per-cell aggregate over repetitions; means and sample standard deviations
/// are taken over the repetitions where the value exists.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub proportion: f64,
    pub scale: f64,
    pub n_ok: usize,
    pub n_error: usize,
    pub mean_correlation: Option<f64>,
    pub sd_correlation: Option<f64>,
    pub mean_rmse: Option<f64>,
    pub sd_rmse: Option<f64>,
    pub mean_n_selected: Option<f64>,
    pub sd_n_selected: Option<f64>,
    pub mean_recall: Option<f64>,
    pub sd_recall: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
    pub n_ok: usize,
    pub n_failed: usize,
}

fn fit_and_score(
    algorithm: Algorithm,
    train_std: &Dataset,
    test_x_std: &ndarray::Array2<f64>,
    test_t: &DenseVector,
    relevant: &BTreeSet<usize>,
    cfg: &BenchConfig,
    cv_seed: u64,
) -> Result<(Option<f64>, Option<f64>, f64, usize, f64)> {
    let (model, selected_h) = match algorithm {
        Algorithm::LsrArd => (fit_lsr_ard(train_std, &cfg.lsr)?, None),
        Algorithm::McrArd => {
            let h = match &cfg.selection {
                BandwidthSelection::Fixed(h) => *h,
                BandwidthSelection::CrossValidated { grid, n_folds, metric } => {
                    let cv = CvLayout { n_folds: *n_folds, seed: cv_seed, metric: *metric };
                    select_bandwidth(train_std, grid, &cv, &cfg.mcr)?.0
                }
            };
            let mcr_cfg = McrArdConfig { bandwidth: h, ..cfg.mcr.clone() };
            (fit_mcr_ard(train_std, &mcr_cfg)?, Some(h))
        }
    };
    let pred = predict(&model, test_x_std)?;
    let corr = match metrics::correlation(&pred, test_t) {
        Ok(c) => Some(c),
        Err(Error::UndefinedCorrelation) => None,
        Err(e) => return Err(e),
    };
    let rmse = metrics::rmse(&pred, test_t)?;
    let selected: BTreeSet<usize> = model.active_indices().into_iter().collect();
    let recall = metrics::selection_recall(&selected, relevant)?;
    Ok((selected_h, corr, rmse, model.n_active(), recall))
}

fn run_cell(
    cfg: &BenchConfig,
    rep: usize,
    pi: usize,
    si: usize,
    fixed_solution: Option<&DenseVector>,
) -> Vec<CellResult> {
    let proportion = cfg.proportions[pi];
    let scale = cfg.scales[si];
    let cell_seed = derive_seed(cfg.master_seed, &[stream::CORRUPTION, rep as u64, pi as u64, si as u64]);
    let dataset_seed = derive_seed(cfg.master_seed, &[stream::DATASET, rep as u64]);
    let cv_seed = derive_seed(cfg.master_seed, &[stream::CV_FOLDS, rep as u64, pi as u64, si as u64]);

    let spec = SyntheticSpec { seed: dataset_seed, ..cfg.synthetic };
    let prepared = (|| -> Result<_> {
        let (train, test, _w, relevant) = generate_with_solution(&spec, fixed_solution)?;
        let corrupted = corrupt_covariates(
            &train,
            &CorruptionSpec { proportion, laplace_scale: scale, seed: cell_seed },
        )?;
        let (train_std, params) = standardize(&corrupted)?;
        let test_x_std = params.apply(&test.x)?;
        Ok((train_std, test_x_std, test.t, relevant))
    })();

    let mut out = Vec::with_capacity(cfg.algorithms.len());
    match prepared {
        Ok((train_std, test_x_std, test_t, relevant)) => {
            for &algorithm in &cfg.algorithms {
                let started = Instant::now();
                let scored = fit_and_score(
                    algorithm, &train_std, &test_x_std, &test_t, &relevant, cfg, cv_seed,
                );
                let wall_secs = started.elapsed().as_secs_f64();
                let mut cell = CellResult {
                    algorithm,
                    proportion_ix: pi,
                    proportion,
                    scale_ix: si,
                    scale,
                    rep,
                    cell_seed,
                    selected_h: None,
                    correlation: None,
                    rmse: None,
                    n_selected: None,
                    recall: None,
                    error: None,
                    wall_secs,
                };
                match scored {
                    Ok((h, corr, rmse, n_sel, recall)) => {
                        cell.selected_h = h;
                        cell.correlation = corr;
                        cell.rmse = Some(rmse);
                        cell.n_selected = Some(n_sel);
                        cell.recall = Some(recall);
                    }
                    Err(e) => cell.error = Some(e.to_string()),
                }
                out.push(cell);
            }
        }
        Err(e) => {
            let msg = e.to_string();
            for &algorithm in &cfg.algorithms {
                out.push(CellResult {
                    algorithm,
                    proportion_ix: pi,
                    proportion,
                    scale_ix: si,
                    scale,
                    rep,
                    cell_seed,
                    selected_h: None,
                    correlation: None,
                    rmse: None,
                    n_selected: None,
                    recall: None,
                    error: Some(msg.clone()),
                    wall_secs: 0.0,
                });
            }
        }
    }
    out
}

/// Run the full sweep. Individual cell failures are recorded in the results
/// rather than aborting; the output order is canonical regardless of worker
/// scheduling.
pub fn run_monte_carlo(cfg: &BenchConfig) -> Result<BenchOutcome> {
    if cfg.reps < 1 {
        return Err(Error::InvalidInput("need at least one repetition".into()));
    }
    if cfg.algorithms.is_empty() {
        return Err(Error::InvalidInput("need at least one algorithm".into()));
    }
    let mut cfg = cfg.clone();
    if cfg.proportions.is_empty() {
        cfg.proportions = vec![0.0];
    }
    if cfg.scales.is_empty() {
        cfg.scales = vec![default_scales()[0]];
    }
    for &p in &cfg.proportions {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("proportion {p} outside [0,1]")));
        }
    }
    for &s in &cfg.scales {
        if !(s > 0.0) {
            return Err(Error::InvalidInput(format!("scale {s} must be positive")));
        }
    }

    let fixed_solution = if cfg.fix_solution {
        let seed = derive_seed(cfg.master_seed, &[stream::SOLUTION]);
        let spec = SyntheticSpec { seed, ..cfg.synthetic };
        Some(generate(&spec)?.2)
    } else {
        None
    };

    let n_props = cfg.proportions.len();
    let n_scales = cfg.scales.len();
    let tasks: Vec<(usize, usize, usize)> = (0..cfg.reps)
        .flat_map(|rep| {
            (0..n_props).flat_map(move |pi| (0..n_scales).map(move |si| (rep, pi, si)))
        })
        .collect();

    let run_all = |cfg: &BenchConfig| -> Vec<CellResult> {
        tasks
            .par_iter()
            .flat_map_iter(|&(rep, pi, si)| run_cell(cfg, rep, pi, si, fixed_solution.as_ref()))
            .collect()
    };
    let mut cells = match cfg.jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;
            pool.install(|| run_all(&cfg))
        }
        None => run_all(&cfg),
    };

    cells.sort_by(|a, b| {
        (a.algorithm.name(), a.proportion_ix, a.scale_ix, a.rep).cmp(&(
            b.algorithm.name(),
            b.proportion_ix,
            b.scale_ix,
            b.rep,
        ))
    });

    let summary = summarize(&cfg, &cells);
    let n_failed = cells.iter().filter(|c| c.error.is_some()).count();
    let n_ok = cells.len() - n_failed;
    Ok(BenchOutcome { cells, summary, n_ok, n_failed })
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(sd))
}

fn summarize(cfg: &BenchConfig, cells: &[CellResult]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &algorithm in &cfg.algorithms {
        for (pi, &proportion) in cfg.proportions.iter().enumerate() {
            for (si, &scale) in cfg.scales.iter().enumerate() {
                let group: Vec<&CellResult> = cells
                    .iter()
                    .filter(|c| {
                        c.algorithm == algorithm && c.proportion_ix == pi && c.scale_ix == si
                    })
                    .collect();
                let ok: Vec<&&CellResult> = group.iter().filter(|c| c.error.is_none()).collect();
                let corr: Vec<f64> = ok.iter().filter_map(|c| c.correlation).collect();
                let rmse: Vec<f64> = ok.iter().filter_map(|c| c.rmse).collect();
                let n_sel: Vec<f64> = ok.iter().filter_map(|c| c.n_selected.map(|v| v as f64)).collect();
                let recall: Vec<f64> = ok.iter().filter_map(|c| c.recall).collect();
                let (mean_correlation, sd_correlation) = mean_sd(&corr);
                let (mean_rmse, sd_rmse) = mean_sd(&rmse);
                let (mean_n_selected, sd_n_selected) = mean_sd(&n_sel);
                let (mean_recall, sd_recall) = mean_sd(&recall);
                rows.push(SummaryRow {
                    algorithm,
                    proportion,
                    scale,
                    n_ok: ok.len(),
                    n_error: group.len() - ok.len(),
                    mean_correlation,
                    sd_correlation,
                    mean_rmse,
                    sd_rmse,
                    mean_n_selected,
                    sd_n_selected,
                    mean_recall,
                    sd_recall,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.algorithm.name(), a.proportion, a.scale)
            .partial_cmp(&(b.algorithm.name(), b.proportion, b.scale))
            .expect("finite grid labels")
    });
    rows
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(crate::data::fmt_g17).unwrap_or_default()
}

/// Render per-repetition results. Wall times and timestamps are deliberately
/// absent; identical seeds must give identical bytes.
pub fn results_csv(cells: &[CellResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "algorithm",
        "proportion",
        "scale",
        "rep",
        "cell_seed",
        "selected_h",
        "correlation",
        "rmse",
        "n_selected",
        "recall",
        "status",
    ])?;
    for c in cells {
        w.write_record([
            c.algorithm.name().to_string(),
            format!("{}", c.proportion),
            format!("{}", c.scale),
            c.rep.to_string(),
            c.cell_seed.to_string(),
            fmt_opt(c.selected_h),
            fmt_opt(c.correlation),
            fmt_opt(c.rmse),
            c.n_selected.map(|v| v.to_string()).unwrap_or_default(),
            fmt_opt(c.recall),
            c.error.clone().map(|e| format!("error: {e}")).unwrap_or_else(|| "ok".into()),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Render the per-cell aggregate table.
pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "algorithm",
        "proportion",
        "scale",
        "n_ok",
        "n_error",
        "mean_correlation",
        "sd_correlation",
        "mean_rmse",
        "sd_rmse",
        "mean_n_selected",
        "sd_n_selected",
        "mean_recall",
        "sd_recall",
    ])?;
    for r in rows {
        w.write_record([
            r.algorithm.name().to_string(),
            format!("{}", r.proportion),
            format!("{}", r.scale),
            r.n_ok.to_string(),
            r.n_error.to_string(),
            fmt_opt(r.mean_correlation),
            fmt_opt(r.sd_correlation),
            fmt_opt(r.mean_rmse),
            fmt_opt(r.sd_rmse),
            fmt_opt(r.mean_n_selected),
            fmt_opt(r.sd_n_selected),
            fmt_opt(r.mean_recall),
            fmt_opt(r.sd_recall),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_default_shapes() {
        let (train, test, w_true, relevant) = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(train.x.dim(), (300, 500));
        assert_eq!(test.x.dim(), (300, 500));
        assert_eq!(w_true.iter().filter(|v| **v != 0.0).count(), 30);
        assert_eq!(relevant.len(), 30);
        assert!(relevant.iter().all(|&i| i < 30));
        // Targets are the exact noiseless product.
        let recomputed = train.x.dot(&w_true);
        assert_eq!(train.t, recomputed);
    }

    #[test]
    fn generate_no_relevant_features_gives_zero_target() {
        let spec = SyntheticSpec { n_relevant: 0, dim: 10, n_train: 5, n_test: 5, seed: 3 };
        let (train, _, w, relevant) = generate(&spec).unwrap();
        assert!(w.iter().all(|v| *v == 0.0));
        assert!(relevant.is_empty());
        assert!(train.t.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn generate_is_bit_deterministic() {
        let spec = SyntheticSpec { dim: 40, n_train: 20, n_test: 10, n_relevant: 5, seed: 77 };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.0.x, b.0.x);
        assert_eq!(a.1.x, b.1.x);
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn corruption_zero_proportion_is_identity() {
        let (train, _, _, _) = generate(&SyntheticSpec {
            dim: 30,
            n_train: 40,
            n_test: 5,
            n_relevant: 4,
            seed: 5,
        })
        .unwrap();
        let out = corrupt_covariates(
            &train,
            &CorruptionSpec { proportion: 0.0, laplace_scale: 1.0, seed: 9 },
        )
        .unwrap();
        assert_eq!(out.x, train.x);
        assert_eq!(out.t, train.t);
    }

    #[test]
    fn corruption_touches_exactly_the_requested_cells() {
        let (train, _, _, _) = generate(&SyntheticSpec {
            dim: 50,
            n_train: 60,
            n_test: 5,
            n_relevant: 4,
            seed: 15,
        })
        .unwrap();
        let spec = CorruptionSpec { proportion: 0.1, laplace_scale: 0.5, seed: 31 };
        let out = corrupt_covariates(&train, &spec).unwrap();
        let changed = out
            .x
            .iter()
            .zip(train.x.iter())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, (0.1f64 * 60.0 * 50.0).round() as usize);
        assert_eq!(out.t, train.t, "targets must never change");
    }

    #[test]
    fn full_corruption_has_laplace_magnitude() {
        // At proportion 1 every cell moves; mean |delta| estimates the scale.
        let (train, _, _, _) = generate(&SyntheticSpec::default()).unwrap();
        let scale = 0.7;
        let out = corrupt_covariates(
            &train,
            &CorruptionSpec { proportion: 1.0, laplace_scale: scale, seed: 41 },
        )
        .unwrap();
        let n = train.x.len() as f64;
        let mean_abs: f64 = out
            .x
            .iter()
            .zip(train.x.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n;
        assert!(
            (mean_abs - scale).abs() < 0.05 * scale,
            "mean |delta| {mean_abs} vs scale {scale}"
        );
    }

    #[test]
    fn laplace_sampler_variance() {
        let mut rng = ChaCha12Rng::seed_from_u64(4242);
        let b = 0.7;
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| laplace_from_uniform(rng.random(), b))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let expect = 2.0 * b * b;
        assert!(
            (var - expect).abs() < 0.02 * expect,
            "variance {var} vs {expect}"
        );
    }

    fn tiny_bench_config() -> BenchConfig {
        BenchConfig {
            synthetic: SyntheticSpec { n_train: 50, n_test: 40, dim: 16, n_relevant: 3, seed: 0 },
            proportions: vec![],
            scales: vec![],
            reps: 1,
            selection: BandwidthSelection::Fixed(5.0),
            master_seed: 7,
            jobs: Some(2),
            ..BenchConfig::default()
        }
    }

    #[test]
    fn degenerate_sweep_has_one_cell_per_algorithm() {
        let out = run_monte_carlo(&tiny_bench_config()).unwrap();
        assert_eq!(out.cells.len(), 2);
        assert!(out.cells.iter().all(|c| c.proportion == 0.0));
        assert_eq!(out.summary.len(), 2);
        assert_eq!(out.n_failed, 0);
    }

    #[test]
    fn sweep_results_are_byte_identical_across_runs() {
        let mut cfg = tiny_bench_config();
        cfg.reps = 2;
        cfg.proportions = vec![0.0, 0.3];
        cfg.scales = vec![0.5];
        let a = run_monte_carlo(&cfg).unwrap();
        let b = run_monte_carlo(&cfg).unwrap();
        assert_eq!(results_csv(&a.cells).unwrap(), results_csv(&b.cells).unwrap());
        assert_eq!(summary_csv(&a.summary).unwrap(), summary_csv(&b.summary).unwrap());
    }

    #[test]
    fn fixed_solution_is_shared_across_reps() {
        let mut cfg = tiny_bench_config();
        cfg.reps = 2;
        cfg.fix_solution = true;
        let out = run_monte_carlo(&cfg).unwrap();
        // With a pinned solution and noise-free targets, both reps should
        // recover the same support.
        let mcr: Vec<&CellResult> = out
            .cells
            .iter()
            .filter(|c| c.algorithm == Algorithm::McrArd)
            .collect();
        assert_eq!(mcr.len(), 2);
        assert_eq!(mcr[0].n_selected, mcr[1].n_selected);
    }
}
