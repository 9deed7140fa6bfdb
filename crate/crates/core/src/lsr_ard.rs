//! Baseline sparse Bayesian regression: Gaussian likelihood with an
//! automatic relevance determination prior.
//!
//! The update loop mirrors the correntropy estimator so the two differ only
//! in the likelihood: posterior step, relevance step, noise step, prune.

use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{
    spd_solve, spd_solve_and_inverse_diagonal, with_jitter_retry, DenseMatrix, DenseVector,
};
use crate::model::{Algorithm, FittedModel};

/// Guard below which a squared weight is treated as zero in the fast
/// relevance update.
pub(crate) const WEIGHT_SQ_FLOOR: f64 = 1e-24;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LsrArdConfig {
    /// Relevance threshold `a_max`; a feature is pruned once its relevance
    /// reaches it.
    pub prune_threshold: f64,
    pub max_iters: usize,
    /// Convergence tolerance on the max-norm change of the full weight vector.
    pub w_tol: f64,
    pub sigma2_floor: f64,
    /// Pin the noise variance instead of learning it. Used for comparison
    /// runs against the correntropy estimator in its large-bandwidth limit.
    pub fixed_noise_variance: Option<f64>,
    /// Column index that is never pruned (the intercept column, when used).
    pub prune_exempt: Option<usize>,
}

impl Default for LsrArdConfig {
    fn default() -> Self {
        Self {
            prune_threshold: 1e6,
            max_iters: 500,
            w_tol: 1e-6,
            sigma2_floor: 1e-12,
            fixed_noise_variance: None,
            prune_exempt: None,
        }
    }
}

impl LsrArdConfig {
    fn validate(&self) -> Result<()> {
        if !(self.prune_threshold > 0.0) {
            return Err(Error::InvalidInput("prune threshold must be positive".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if !(self.w_tol > 0.0) || !(self.sigma2_floor > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Posterior mean and marginal variances of the weights under a Gaussian
/// likelihood with noise variance `sigma2` and per-feature prior precisions
/// `a`: mean = σ⁻²Σ Xᵀt with Σ = (σ⁻²XᵀX + diag(a))⁻¹.
pub fn gaussian_posterior(
    x: &DenseMatrix,
    t: &DenseVector,
    a: &DenseVector,
    sigma2: f64,
) -> Result<(DenseVector, DenseVector)> {
    let gram = x.t().dot(x);
    let xt = x.t().dot(t);
    posterior_from_gram(&gram, &xt, a, sigma2)
}

fn posterior_from_gram(
    gram: &DenseMatrix,
    xt: &DenseVector,
    a: &DenseVector,
    sigma2: f64,
) -> Result<(DenseVector, DenseVector)> {
    let mut m = gram / sigma2;
    for (i, &ai) in a.iter().enumerate() {
        m[[i, i]] += ai;
    }
    let rhs = xt / sigma2;
    with_jitter_retry(&m, |mm| spd_solve_and_inverse_diagonal(mm, &rhs))
}

/// Fit the Gaussian-likelihood ARD model. Expects standardized covariates.
pub fn fit_lsr_ard(data: &Dataset, cfg: &LsrArdConfig) -> Result<FittedModel> {
    cfg.validate()?;
    let n = data.n_samples();
    let d = data.n_features();
    if n < 2 {
        return Err(Error::EmptyDataset(format!("need at least 2 samples, got {n}")));
    }

    let x = &data.x;
    let t = &data.t;
    let mean_t = t.sum() / n as f64;
    let var_t = t.iter().map(|v| (v - mean_t) * (v - mean_t)).sum::<f64>() / n as f64;
    let mut sigma2 = cfg
        .fixed_noise_variance
        .unwrap_or((0.1 * var_t).max(cfg.sigma2_floor))
        .max(cfg.sigma2_floor);

    let mut active: Vec<usize> = (0..d).collect();
    let mut gram = x.t().dot(x);
    let mut xt = x.t().dot(t);
    let mut a = Array1::<f64>::ones(d);
    let mut relevance_full = Array1::<f64>::ones(d);

    // Initialization: one ridge solve with unit prior precision.
    let mut w_full = {
        let mut m = &gram / sigma2;
        for i in 0..d {
            m[[i, i]] += 1.0;
        }
        let rhs = &xt / sigma2;
        with_jitter_retry(&m, |mm| spd_solve(mm, &rhs))?
    };

    let mut trace = Vec::new();
    let mut n_iters = 0;

    for iter in 1..=cfg.max_iters {
        n_iters = iter;
        let (w_a, s_diag) = posterior_from_gram(&gram, &xt, &a, sigma2)?;

        // Effective degrees of freedom per feature, from the pre-update a.
        let gamma: Vec<f64> = a
            .iter()
            .zip(s_diag.iter())
            .map(|(&ai, &si)| 1.0 - ai * si)
            .collect();
        let a_new: Vec<f64> = (0..active.len())
            .map(|i| {
                let w2 = w_a[i] * w_a[i];
                if gamma[i] > 0.0 && w2 >= WEIGHT_SQ_FLOOR {
                    gamma[i] / w2
                } else {
                    1.0 / (w2 + s_diag[i])
                }
            })
            .collect();

        // Noise update with the fresh posterior mean.
        let mut w_pre = Array1::<f64>::zeros(d);
        for (i, &col) in active.iter().enumerate() {
            w_pre[col] = w_a[i];
        }
        let resid = t - &x.dot(&w_pre);
        let rss: f64 = resid.iter().map(|v| v * v).sum();
        if cfg.fixed_noise_variance.is_none() {
            let dof = (n as f64 - gamma.iter().sum::<f64>()).max(1e-12);
            sigma2 = (rss / dof).max(cfg.sigma2_floor);
        }

        for (i, &col) in active.iter().enumerate() {
            relevance_full[col] = a_new[i];
        }

        let keep: Vec<usize> = (0..active.len())
            .filter(|&i| {
                a_new[i] < cfg.prune_threshold || cfg.prune_exempt == Some(active[i])
            })
            .collect();

        let mut w_next = Array1::<f64>::zeros(d);
        for &i in &keep {
            w_next[active[i]] = w_a[i];
        }

        let delta = w_next
            .iter()
            .zip(w_full.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        w_full = w_next;

        let penalty: f64 = keep.iter().map(|&i| a_new[i] * w_a[i] * w_a[i]).sum();
        trace.push(-rss / (2.0 * sigma2) - 0.5 * penalty);

        if keep.len() < active.len() {
            let keep_ix: Vec<usize> = keep.clone();
            active = keep.iter().map(|&i| active[i]).collect();
            if active.is_empty() {
                return Err(Error::AllFeaturesPruned);
            }
            gram = gram.select(Axis(0), &keep_ix).select(Axis(1), &keep_ix);
            xt = Array1::from_iter(keep_ix.iter().map(|&i| xt[i]));
            a = Array1::from_iter(keep_ix.iter().map(|&i| a_new[i]));
        } else {
            a = Array1::from_vec(a_new);
        }

        if delta < cfg.w_tol {
            break;
        }
    }

    let mut active_mask = vec![false; d];
    for &col in &active {
        active_mask[col] = true;
    }
    Ok(FittedModel {
        algorithm: Algorithm::LsrArd,
        weights: w_full,
        active_mask,
        relevance: relevance_full,
        noise_variance: Some(sigma2),
        bandwidth: None,
        n_iters,
        objective_trace: trace,
    })
}
