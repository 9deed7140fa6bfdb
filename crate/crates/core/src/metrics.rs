//! Evaluation metrics: correlation coefficient, root mean squared error,
//! feature-selection recall, and per-source contribution shares.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseVector;

/// One evaluation outcome. `correlation` is `None` when it is undefined
/// (a constant prediction or a constant truth vector).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub correlation: Option<f64>,
    pub rmse: f64,
    pub n_selected: usize,
    pub recall: Option<f64>,
    pub contribution: Option<Vec<f64>>,
}

/// Pearson correlation between prediction and truth.
///
/// Variances use the population convention (divide by N) in both numerator
/// and denominator. Zero variance in either input is an error rather than a
/// silent zero.
pub fn correlation(pred: &DenseVector, truth: &DenseVector) -> Result<f64> {
    check_equal_nonzero_len(pred, truth)?;
    let n = pred.len() as f64;
    let mp = pred.sum() / n;
    let mt = truth.sum() / n;
    let mut cov = 0.0;
    let mut vp = 0.0;
    let mut vt = 0.0;
    for (p, t) in pred.iter().zip(truth.iter()) {
        let dp = p - mp;
        let dt = t - mt;
        cov += dp * dt;
        vp += dp * dp;
        vt += dt * dt;
    }
    if vp == 0.0 || vt == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((cov / (vp * vt).sqrt()).clamp(-1.0, 1.0))
}

/// Root mean squared error between prediction and truth.
pub fn rmse(pred: &DenseVector, truth: &DenseVector) -> Result<f64> {
    check_equal_nonzero_len(pred, truth)?;
    let n = pred.len() as f64;
    let ss: f64 = pred
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((ss / n).sqrt())
}

fn check_equal_nonzero_len(a: &DenseVector, b: &DenseVector) -> Result<()> {
    if a.is_empty() {
        return Err(Error::EmptyDataset("metric on empty vectors".into()));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "metric inputs",
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Fraction of truly relevant feature indices present in the selected set.
pub fn selection_recall(selected: &BTreeSet<usize>, relevant: &BTreeSet<usize>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::EmptyRelevantSet);
    }
    let hit = selected.intersection(relevant).count();
    Ok(hit as f64 / relevant.len() as f64)
}

/// Share of total absolute weight mass carried by each source in a lagged
/// design with `n_sources * n_lags` columns, source-major as produced by
/// [`crate::data::build_lagged_design`].
pub fn source_contribution(
    weights: &DenseVector,
    n_sources: usize,
    n_lags: usize,
) -> Result<DenseVector> {
    if weights.len() != n_sources * n_lags {
        return Err(Error::DimensionMismatch {
            what: "lag-structured weights",
            expected: n_sources * n_lags,
            got: weights.len(),
        });
    }
    let mut per_source = vec![0.0f64; n_sources];
    for s in 0..n_sources {
        per_source[s] = (0..n_lags).map(|j| weights[s * n_lags + j].abs()).sum();
    }
    let total: f64 = per_source.iter().sum();
    if total == 0.0 {
        return Err(Error::AllZeroWeights);
    }
    Ok(DenseVector::from_vec(
        per_source.into_iter().map(|v| v / total).collect(),
    ))
}

/// Indices of the `k` largest contributions, ties resolved toward the lower
/// index. Returned in ascending index order.
pub fn top_k_sources(contribution: &DenseVector, k: usize) -> Result<Vec<usize>> {
    if k > contribution.len() {
        return Err(Error::KTooLarge { k, len: contribution.len() });
    }
    let mut order: Vec<usize> = (0..contribution.len()).collect();
    order.sort_by(|&a, &b| {
        contribution[b]
            .partial_cmp(&contribution[a])
            .expect("finite contributions")
            .then(a.cmp(&b))
    });
    let mut top: Vec<usize> = order.into_iter().take(k).collect();
    top.sort_unstable();
    Ok(top)
}
