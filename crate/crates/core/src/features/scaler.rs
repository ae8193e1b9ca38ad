use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix};

/// Per-column z-score statistics fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
    /// Columns with zero spread; they scale to 0.
    pub zero_std: Vec<usize>,
    pub fitted_on: usize,
}

impl ScalerStats {
    pub fn fit(columns: &[String], x: ArrayView2<f64>) -> Result<Self, FeatureError> {
        if columns.len() != x.ncols() {
            return Err(FeatureError::ScalerColumnMismatch {
                expected: columns.len(),
                found: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Err(FeatureError::SeriesTooShort { needed: 1, got: 0 });
        }
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        let mut zero_std = Vec::new();
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = var.sqrt();
            if s == 0.0 {
                zero_std.push(j);
            }
            mean.push(m);
            std.push(s);
        }
        Ok(ScalerStats {
            columns: columns.to_vec(),
            mean,
            std,
            zero_std,
            fitted_on: x.nrows(),
        })
    }

    pub fn transform(&self, columns: &[String], x: ArrayView2<f64>) -> Result<Array2<f64>, FeatureError> {
        if columns != self.columns.as_slice() || x.ncols() != self.mean.len() {
            return Err(FeatureError::ScalerColumnMismatch {
                expected: self.mean.len(),
                found: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            if s == 0.0 {
                col.fill(0.0);
            } else {
                col.mapv_inplace(|v| (v - m) / s);
            }
        }
        Ok(out)
    }
}

pub fn fit_scaler(train: &FeatureMatrix) -> Result<ScalerStats, FeatureError> {
    ScalerStats::fit(&train.columns, train.x.view())
}

pub fn apply_scaler(stats: &ScalerStats, m: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
    let x = stats.transform(&m.columns, m.x.view())?;
    Ok(FeatureMatrix { x, ..m.clone() })
}
