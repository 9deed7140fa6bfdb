//! Dataset containers, covariate standardization, lagged design matrices,
//! and target normalization.
//!
//! Both estimators expect standardized covariates. [`standardize`] learns the
//! per-column transform on training data; [`StandardizationParams::apply`]
//! replays it on held-out covariates so train and test live in the same space.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector};

/// A covariate matrix paired with its response vector.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DenseMatrix,
    pub t: DenseVector,
    pub feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: DenseMatrix, t: DenseVector) -> Result<Self> {
        Self::with_names(x, t, None)
    }

    pub fn with_names(
        x: DenseMatrix,
        t: DenseVector,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if x.nrows() != t.len() {
            return Err(Error::DimensionMismatch {
                what: "dataset rows vs targets",
                expected: x.nrows(),
                got: t.len(),
            });
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::EmptyDataset("need at least one row and one column".into()));
        }
        if let Some(names) = &feature_names {
            if names.len() != x.ncols() {
                return Err(Error::DimensionMismatch {
                    what: "feature names vs columns",
                    expected: x.ncols(),
                    got: names.len(),
                });
            }
        }
        if x.iter().any(|v| !v.is_finite()) || t.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains NaN or infinite values".into()));
        }
        Ok(Self { x, t, feature_names })
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }
}

/// Per-column location and scale learned on training covariates.
///
/// `scales` are population standard deviations (divide by N); constant
/// columns get scale 1 so the transform stays invertible.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl StandardizationParams {
    /// Apply the learned transform to a covariate matrix.
    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                what: "standardization columns",
                expected: self.means.len(),
                got: x.ncols(),
            });
        }
        let mut out = x.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let m = self.means[j];
            let s = self.scales[j];
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }
}

/// Center each covariate column and scale it to unit population standard
/// deviation. Constant columns are centered and given scale 1.
pub fn standardize(train: &Dataset) -> Result<(Dataset, StandardizationParams)> {
    let n = train.n_samples();
    if n < 2 {
        return Err(Error::EmptyDataset(format!(
            "standardization needs at least 2 samples, got {n}"
        )));
    }
    let d = train.n_features();
    let mut means = Vec::with_capacity(d);
    let mut scales = Vec::with_capacity(d);
    for col in train.x.axis_iter(Axis(1)) {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        means.push(mean);
        scales.push(if sd > 0.0 { sd } else { 1.0 });
    }
    let params = StandardizationParams { means, scales };
    let x = params.apply(&train.x)?;
    let out = Dataset::with_names(x, train.t.clone(), train.feature_names.clone())?;
    Ok((out, params))
}

/// Window specification for lagged design matrices. `n_lags` counts the
/// current sample as lag 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LagSpec {
    pub n_lags: usize,
    pub stride: usize,
}

impl Default for LagSpec {
    fn default() -> Self {
        Self { n_lags: 21, stride: 1 }
    }
}

/// Build a regression dataset where row i predicts `target` at time
/// `i + (n_lags-1)*stride` from the `n_lags` most recent samples of every
/// source column.
///
/// Columns are source-major: all lags of source 0, then source 1, and so on.
/// Within a source, columns run oldest to newest, so the last column of each
/// block is lag 0 (the current sample).
pub fn build_lagged_design(
    series: &DenseMatrix,
    target: &DenseVector,
    spec: &LagSpec,
) -> Result<Dataset> {
    let t_len = series.nrows();
    let n_sources = series.ncols();
    if spec.n_lags < 1 {
        return Err(Error::InvalidInput("n_lags must be at least 1".into()));
    }
    if spec.stride < 1 {
        return Err(Error::InvalidInput("stride must be at least 1".into()));
    }
    if target.len() != t_len {
        return Err(Error::DimensionMismatch {
            what: "series rows vs target length",
            expected: t_len,
            got: target.len(),
        });
    }
    let window = spec.n_lags * spec.stride;
    if t_len <= window {
        return Err(Error::SeriesTooShort { len: t_len, needed: window });
    }
    let offset = (spec.n_lags - 1) * spec.stride;
    let n_rows = t_len - offset;
    let n_cols = n_sources * spec.n_lags;

    let mut x = Array2::<f64>::zeros((n_rows, n_cols));
    for i in 0..n_rows {
        let now = i + offset;
        for s in 0..n_sources {
            for j in 0..spec.n_lags {
                // Column j within a source block holds lag (n_lags-1-j).
                let lag = spec.n_lags - 1 - j;
                x[[i, s * spec.n_lags + j]] = series[[now - lag * spec.stride, s]];
            }
        }
    }
    let t = target.slice(ndarray::s![offset..]).to_owned();
    let names = (0..n_sources)
        .flat_map(|s| (0..spec.n_lags).map(move |j| format!("src{s}_lag{}", spec.n_lags - 1 - j)))
        .collect();
    Dataset::with_names(x, t, Some(names))
}

/// Affine-map a target vector into [0, 1], returning the recorded min and
/// max. A constant vector maps to all zeros.
pub fn normalize_target_01(t: &DenseVector) -> Result<(DenseVector, f64, f64)> {
    if t.is_empty() {
        return Err(Error::EmptyDataset("cannot normalize an empty target".into()));
    }
    let min = t.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok((Array1::zeros(t.len()), min, max));
    }
    let range = max - min;
    Ok((t.mapv(|v| (v - min) / range), min, max))
}

/// Invert [`normalize_target_01`].
pub fn denormalize_target_01(t: &DenseVector, min: f64, max: f64) -> DenseVector {
    if max == min {
        return Array1::from_elem(t.len(), min);
    }
    t.mapv(|v| v * (max - min) + min)
}

/// 17-significant-digit formatting used for every computed value written to
/// CSV, so reruns diff cleanly.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_field(raw: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| {
        Error::InvalidInput(format!(
            "line {line}, column `{column}`: cannot parse `{raw}` as a number"
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::InvalidInput(format!(
            "line {line}, column `{column}`: non-finite value `{raw}`"
        )));
    }
    Ok(v)
}

pub(crate) fn read_csv_table(path: &std::path::Path) -> Result<(Vec<String>, Vec<Vec<f64>>, Vec<u64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    if headers.is_empty() {
        return Err(Error::InvalidInput(format!("{}: empty header row", path.display())));
    }
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(Error::InvalidInput(format!(
                "line {line}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(headers.len());
        for (field, name) in record.iter().zip(&headers) {
            row.push(parse_field(field, line, name)?);
        }
        rows.push(row);
        lines.push(line);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(format!("{}: no data rows", path.display())));
    }
    Ok((headers, rows, lines))
}

/// Read a regression dataset: header row with feature names, one sample per
/// row, the target in the column named `target_col`.
pub fn load_dataset_csv(path: &std::path::Path, target_col: &str) -> Result<Dataset> {
    let (headers, rows, _) = read_csv_table(path)?;
    let target_ix = headers.iter().position(|h| h == target_col).ok_or_else(|| {
        Error::InvalidInput(format!(
            "missing target column `{target_col}`; found columns: {}",
            headers.join(", ")
        ))
    })?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| (i != target_ix).then(|| h.clone()))
        .collect();
    if names.is_empty() {
        return Err(Error::InvalidInput("no feature columns besides the target".into()));
    }
    let n = rows.len();
    let d = names.len();
    let mut x = Array2::<f64>::zeros((n, d));
    let mut t = Array1::<f64>::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        let mut k = 0;
        for (j, &v) in row.iter().enumerate() {
            if j == target_ix {
                t[i] = v;
            } else {
                x[[i, k]] = v;
                k += 1;
            }
        }
    }
    Dataset::with_names(x, t, Some(names))
}

/// Read a multichannel time series: first column `time_index`, remaining
/// columns one source each. Returns the T×S value matrix and source names.
pub fn load_series_csv(path: &std::path::Path) -> Result<(DenseMatrix, Vec<String>)> {
    let (headers, rows, _) = read_csv_table(path)?;
    if headers[0] != "time_index" {
        return Err(Error::InvalidInput(format!(
            "first column of a series CSV must be `time_index`, found `{}`",
            headers[0]
        )));
    }
    if headers.len() < 2 {
        return Err(Error::InvalidInput("series CSV has no source columns".into()));
    }
    let names: Vec<String> = headers[1..].to_vec();
    let t_len = rows.len();
    let s = names.len();
    let mut series = Array2::<f64>::zeros((t_len, s));
    for (i, row) in rows.iter().enumerate() {
        for j in 0..s {
            series[[i, j]] = row[j + 1];
        }
    }
    Ok((series, names))
}

/// Read a target vector: either a single column, or `time_index` plus one
/// value column.
pub fn load_target_csv(path: &std::path::Path) -> Result<DenseVector> {
    let (headers, rows, _) = read_csv_table(path)?;
    let value_ix = match headers.len() {
        1 => 0,
        2 if headers[0] == "time_index" => 1,
        _ => {
            return Err(Error::InvalidInput(format!(
                "target CSV must have one value column (optionally after `time_index`); \
                 found columns: {}",
                headers.join(", ")
            )))
        }
    };
    Ok(Array1::from_iter(rows.iter().map(|r| r[value_ix])))
}

/// Write a dataset in the layout [`load_dataset_csv`] reads back.
pub fn write_dataset_csv(
    path: &std::path::Path,
    data: &Dataset,
    target_col: &str,
) -> Result<()> {
    let names: Vec<String> = match &data.feature_names {
        Some(n) => n.clone(),
        None => (0..data.n_features()).map(|j| format!("x{j}")).collect(),
    };
    let mut w = csv::Writer::from_path(path)?;
    let mut header = names.clone();
    header.push(target_col.to_string());
    w.write_record(&header)?;
    for i in 0..data.n_samples() {
        let mut rec: Vec<String> =
            data.x.row(i).iter().map(|v| fmt_g17(*v)).collect();
        rec.push(fmt_g17(data.t[i]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
