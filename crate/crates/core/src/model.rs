//! Fitted-model representation shared by both estimators, plus prediction
//! and the on-disk JSON schema.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::data::StandardizationParams;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    LsrArd,
    McrArd,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::LsrArd => "lsr-ard",
            Algorithm::McrArd => "mcr-ard",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lsr-ard" => Ok(Algorithm::LsrArd),
            "mcr-ard" => Ok(Algorithm::McrArd),
            other => Err(Error::InvalidInput(format!(
                "unknown algorithm `{other}`; expected lsr-ard or mcr-ard"
            ))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Converged sparse fit in standardized covariate space.
///
/// `weights` is full-length with exact zeros at pruned positions. For pruned
/// features `relevance` keeps the value that crossed the pruning threshold.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub algorithm: Algorithm,
    pub weights: DenseVector,
    pub active_mask: Vec<bool>,
    pub relevance: DenseVector,
    /// Learned (or pinned) error variance; Gaussian-likelihood fits only.
    pub noise_variance: Option<f64>,
    /// Correntropy kernel bandwidth; correntropy fits only.
    pub bandwidth: Option<f64>,
    pub n_iters: usize,
    pub objective_trace: Vec<f64>,
}

impl FittedModel {
    pub fn active_indices(&self) -> Vec<usize> {
        self.active_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
            .collect()
    }

    pub fn n_active(&self) -> usize {
        self.active_mask.iter().filter(|&&a| a).count()
    }
}

/// Linear prediction `X · w` in the same (standardized) space the model was
/// fitted in.
pub fn predict(model: &FittedModel, x: &DenseMatrix) -> Result<DenseVector> {
    if x.ncols() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            what: "prediction covariates",
            expected: model.weights.len(),
            got: x.ncols(),
        });
    }
    Ok(x.dot(&model.weights))
}

/// JSON document written by `fit` and consumed by `predict`.
///
/// `weights_standardized` applies to standardized covariates (the intercept
/// column, when present, is the last entry). `weights_original` and
/// `intercept_original` express the same fit in raw covariate units:
/// prediction = Σ weights_original[d]·x[d] + intercept_original.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub algorithm: String,
    pub feature_names: Vec<String>,
    pub weights_standardized: Vec<f64>,
    pub weights_original: Vec<f64>,
    pub intercept_original: f64,
    pub has_intercept_column: bool,
    pub active_indices: Vec<usize>,
    pub relevance: Vec<f64>,
    pub bandwidth: Option<f64>,
    pub noise_variance: Option<f64>,
    pub n_iters: usize,
    pub objective_trace: Vec<f64>,
    pub standardization: StandardizationParams,
}

impl ModelFile {
    /// Bundle a fit with its preprocessing so predictions can be replayed on
    /// raw covariates.
    pub fn from_fit(
        model: &FittedModel,
        params: &StandardizationParams,
        feature_names: Vec<String>,
        has_intercept_column: bool,
    ) -> Result<Self> {
        let d = params.means.len();
        let expect = d + usize::from(has_intercept_column);
        if model.weights.len() != expect {
            return Err(Error::DimensionMismatch {
                what: "model weights vs standardization params",
                expected: expect,
                got: model.weights.len(),
            });
        }
        let mut weights_original = Vec::with_capacity(d);
        let mut intercept = if has_intercept_column { model.weights[d] } else { 0.0 };
        for j in 0..d {
            let w = model.weights[j] / params.scales[j];
            weights_original.push(w);
            intercept -= w * params.means[j];
        }
        Ok(Self {
            algorithm: model.algorithm.name().to_string(),
            feature_names,
            weights_standardized: model.weights.to_vec(),
            weights_original,
            intercept_original: intercept,
            has_intercept_column,
            active_indices: model.active_indices(),
            relevance: model.relevance.to_vec(),
            bandwidth: model.bandwidth,
            noise_variance: model.noise_variance,
            n_iters: model.n_iters,
            objective_trace: model.objective_trace.clone(),
            standardization: params.clone(),
        })
    }

    /// Predict on raw covariates by replaying the stored standardization.
    pub fn predict_raw(&self, x: &DenseMatrix) -> Result<DenseVector> {
        if x.ncols() != self.standardization.means.len() {
            return Err(Error::DimensionMismatch {
                what: "model features vs input columns",
                expected: self.standardization.means.len(),
                got: x.ncols(),
            });
        }
        let std = self.standardization.apply(x)?;
        let w = Array1::from_vec(self.weights_standardized.clone());
        let d = self.standardization.means.len();
        let mut out = std.dot(&w.slice(ndarray::s![..d]).to_owned());
        if self.has_intercept_column {
            out += self.weights_standardized[d];
        }
        Ok(out)
    }
}
