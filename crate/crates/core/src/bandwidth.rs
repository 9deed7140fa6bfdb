//! Kernel bandwidth selection over a logarithmic grid, by k-fold
//! cross-validation or a seeded holdout split.

use ndarray::{Array1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::mcr_ard::{fit_mcr_ard, McrArdConfig};
use crate::metrics;
use crate::model::predict;

/// Logarithmic bandwidth grid. Defaults span 1.0 to 1000 in 30 points.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandwidthGrid {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

impl Default for BandwidthGrid {
    fn default() -> Self {
        Self { lo: 1.0, hi: 1000.0, n_points: 30 }
    }
}

/// Grid points `lo·(hi/lo)^(i/(n-1))`, endpoints exact.
///
/// A single-point grid is allowed when `lo == hi`; otherwise `lo < hi` is
/// required.
pub fn grid_points(grid: &BandwidthGrid) -> Result<DenseVector> {
    if !(grid.lo > 0.0) || !grid.lo.is_finite() || !grid.hi.is_finite() {
        return Err(Error::BadGrid(format!(
            "bounds must be positive finite, got [{}, {}]",
            grid.lo, grid.hi
        )));
    }
    match grid.n_points {
        0 => Err(Error::BadGrid("need at least one grid point".into())),
        1 => {
            if grid.lo == grid.hi {
                Ok(Array1::from_vec(vec![grid.lo]))
            } else {
                Err(Error::BadGrid("a single-point grid needs lo == hi".into()))
            }
        }
        n => {
            if !(grid.lo < grid.hi) {
                return Err(Error::BadGrid(format!(
                    "need lo < hi, got [{}, {}]",
                    grid.lo, grid.hi
                )));
            }
            let ratio = grid.hi / grid.lo;
            let mut pts = Vec::with_capacity(n);
            pts.push(grid.lo);
            for i in 1..(n - 1) {
                pts.push(grid.lo * ratio.powf(i as f64 / (n - 1) as f64));
            }
            pts.push(grid.hi);
            Ok(Array1::from_vec(pts))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SelectionMetric {
    #[default]
    Correlation,
    Rmse,
}

impl SelectionMetric {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "correlation" | "corr" => Ok(Self::Correlation),
            "rmse" => Ok(Self::Rmse),
            other => Err(Error::InvalidInput(format!(
                "unknown selection metric `{other}`; expected correlation or rmse"
            ))),
        }
    }
}

/// Cross-validation layout: fold count, shuffle seed, selection metric.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CvLayout {
    pub n_folds: usize,
    pub seed: u64,
    pub metric: SelectionMetric,
}

impl Default for CvLayout {
    fn default() -> Self {
        Self { n_folds: 5, seed: 0, metric: SelectionMetric::Correlation }
    }
}

/// One audit row of the selection table: per-bandwidth fold statistics.
/// Means and standard deviations cover the folds that fit successfully;
/// `n_failed` counts the rest. Selection itself disqualifies a bandwidth as
/// soon as one fold fails.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvRow {
    pub h: f64,
    pub mean_corr: Option<f64>,
    pub sd_corr: Option<f64>,
    pub mean_rmse: Option<f64>,
    pub sd_rmse: Option<f64>,
    pub n_failed: usize,
}

/// Render the audit table: one row per grid point.
pub fn cv_table_csv(rows: &[CvRow]) -> Result<String> {
    let fmt = |v: Option<f64>| v.map(crate::data::fmt_g17).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["h", "mean_corr", "sd_corr", "mean_rmse", "sd_rmse"])?;
    for r in rows {
        w.write_record([
            crate::data::fmt_g17(r.h),
            fmt(r.mean_corr),
            fmt(r.sd_corr),
            fmt(r.mean_rmse),
            fmt(r.sd_rmse),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Disjoint fold index sets from a seeded shuffle; every sample lands in
/// exactly one fold, sizes differ by at most one.
pub fn make_folds(n: usize, n_folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut ix: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    ix.shuffle(&mut rng);
    let base = n / n_folds;
    let rem = n % n_folds;
    let mut folds = Vec::with_capacity(n_folds);
    let mut start = 0;
    for f in 0..n_folds {
        let len = base + usize::from(f < rem);
        folds.push(ix[start..start + len].to_vec());
        start += len;
    }
    folds
}

struct Split {
    train: Dataset,
    val_x: crate::linalg::DenseMatrix,
    val_t: DenseVector,
}

fn build_splits(data: &Dataset, folds: &[Vec<usize>]) -> Vec<Split> {
    folds
        .iter()
        .map(|fold| {
            let in_fold: std::collections::HashSet<usize> = fold.iter().copied().collect();
            let train_ix: Vec<usize> =
                (0..data.n_samples()).filter(|i| !in_fold.contains(i)).collect();
            let train = Dataset {
                x: data.x.select(Axis(0), &train_ix),
                t: Array1::from_iter(train_ix.iter().map(|&i| data.t[i])),
                feature_names: None,
            };
            Split {
                train,
                val_x: data.x.select(Axis(0), fold),
                val_t: Array1::from_iter(fold.iter().map(|&i| data.t[i])),
            }
        })
        .collect()
}

type FoldScore = std::result::Result<(Option<f64>, f64), Error>;

fn score_one(split: &Split, h: f64, base: &McrArdConfig) -> FoldScore {
    let cfg = McrArdConfig { bandwidth: h, ..base.clone() };
    let model = fit_mcr_ard(&split.train, &cfg)?;
    let pred = predict(&model, &split.val_x)?;
    let corr = match metrics::correlation(&pred, &split.val_t) {
        Ok(c) => Some(c),
        Err(Error::UndefinedCorrelation) => None,
        Err(e) => return Err(e),
    };
    let rmse = metrics::rmse(&pred, &split.val_t)?;
    Ok((corr, rmse))
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

fn select_from_scores(
    hs: &DenseVector,
    fold_scores: Vec<Vec<FoldScore>>,
    metric: SelectionMetric,
) -> Result<(f64, Vec<CvRow>)> {
    let mut rows = Vec::with_capacity(hs.len());
    let mut selection_scores = Vec::with_capacity(hs.len());
    let mut last_error: Option<Error> = None;

    for (hi, scores) in fold_scores.into_iter().enumerate() {
        let mut corrs = Vec::new();
        let mut rmses = Vec::new();
        let mut n_failed = 0;
        let mut any_missing_corr = false;
        let mut any_missing_rmse = false;
        for s in scores {
            match s {
                Ok((corr, rmse)) => {
                    match corr {
                        Some(c) => corrs.push(c),
                        None => any_missing_corr = true,
                    }
                    rmses.push(rmse);
                }
                Err(e) => {
                    n_failed += 1;
                    any_missing_corr = true;
                    any_missing_rmse = true;
                    last_error = Some(e);
                }
            }
        }
        // A failed fold disqualifies the bandwidth outright.
        let score = match metric {
            SelectionMetric::Correlation => {
                if any_missing_corr || corrs.is_empty() {
                    f64::NEG_INFINITY
                } else {
                    corrs.iter().sum::<f64>() / corrs.len() as f64
                }
            }
            SelectionMetric::Rmse => {
                if any_missing_rmse || rmses.is_empty() {
                    f64::NEG_INFINITY
                } else {
                    -(rmses.iter().sum::<f64>() / rmses.len() as f64)
                }
            }
        };
        selection_scores.push(score);
        let (mean_corr, sd_corr) = mean_sd(&corrs);
        let (mean_rmse, sd_rmse) = mean_sd(&rmses);
        rows.push(CvRow { h: hs[hi], mean_corr, sd_corr, mean_rmse, sd_rmse, n_failed });
    }

    let best = selection_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(last_error.unwrap_or(Error::UndefinedCorrelation));
    }
    // Ties resolve to the largest bandwidth.
    let mut chosen = hs[0];
    for (hi, &score) in selection_scores.iter().enumerate() {
        if (best - score).abs() <= 1e-12 && hs[hi] >= chosen {
            chosen = hs[hi];
        }
    }
    Ok((chosen, rows))
}

/// Pick the bandwidth whose cross-validated metric is best. Returns the
/// winning grid point and the full table for audit. Deterministic given
/// `(data, grid, cv.seed, cfg)`; callers must pass training data only.
pub fn select_bandwidth(
    data: &Dataset,
    grid: &BandwidthGrid,
    cv: &CvLayout,
    base: &McrArdConfig,
) -> Result<(f64, Vec<CvRow>)> {
    let n = data.n_samples();
    if cv.n_folds < 2 {
        return Err(Error::InvalidInput("need at least 2 folds".into()));
    }
    if n < cv.n_folds {
        return Err(Error::EmptyDataset(format!(
            "{n} samples cannot be split into {} folds",
            cv.n_folds
        )));
    }
    let hs = grid_points(grid)?;
    let folds = make_folds(n, cv.n_folds, cv.seed);
    let splits = build_splits(data, &folds);

    let tasks: Vec<(usize, usize)> = (0..hs.len())
        .flat_map(|hi| (0..splits.len()).map(move |fi| (hi, fi)))
        .collect();
    let mut scored: Vec<((usize, usize), FoldScore)> = tasks
        .into_par_iter()
        .map(|(hi, fi)| ((hi, fi), score_one(&splits[fi], hs[hi], base)))
        .collect();
    scored.sort_by_key(|((hi, fi), _)| (*hi, *fi));

    let mut per_h: Vec<Vec<FoldScore>> = (0..hs.len()).map(|_| Vec::new()).collect();
    for ((hi, _), s) in scored {
        per_h[hi].push(s);
    }
    select_from_scores(&hs, per_h, cv.metric)
}

/// Holdout variant: train on a seeded subset, validate on the remainder,
/// same grid and selection rule.
pub fn select_bandwidth_holdout(
    data: &Dataset,
    grid: &BandwidthGrid,
    validation_fraction: f64,
    seed: u64,
    metric: SelectionMetric,
    base: &McrArdConfig,
) -> Result<(f64, Vec<CvRow>)> {
    let n = data.n_samples();
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidInput(
            "validation fraction must lie strictly between 0 and 1".into(),
        ));
    }
    let n_val = ((validation_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut ix: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    ix.shuffle(&mut rng);
    let val_ix = ix[(n - n_val)..].to_vec();
    let splits = build_splits(data, &[val_ix]);

    let hs = grid_points(grid)?;
    let mut scored: Vec<(usize, FoldScore)> = (0..hs.len())
        .into_par_iter()
        .map(|hi| (hi, score_one(&splits[0], hs[hi], base)))
        .collect();
    scored.sort_by_key(|(hi, _)| *hi);
    let per_h: Vec<Vec<FoldScore>> = scored.into_iter().map(|(_, s)| vec![s]).collect();
    select_from_scores(&hs, per_h, metric)
}
