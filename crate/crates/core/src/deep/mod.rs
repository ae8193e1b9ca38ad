//! Sequence regressors (stacked LSTM, Transformer encoder) trained with Adam
//! on exact reverse-mode gradients, in double precision.

mod adam;
mod lstm;
mod params;
mod train;
mod transformer;
mod window;

use ndarray::ArrayView2;
use thiserror::Error;

pub use adam::{AdamConfig, AdamState};
pub use lstm::{Lstm, LstmCache, LstmConfig};
pub use params::{ParamSet, TensorId, TensorSpec};
pub use train::{
    train_network, write_curve_csv, Checkpoint, EarlyStopping, EpochRecord, NamedTensor, StopDecision, TargetScaler,
    TrainConfig, TrainedNetwork,
};
pub use transformer::{attention, positional_encoding, Transformer, TransformerCache, TransformerConfig};
pub use window::{gather_windows, window_row, Layout};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeepError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },
    #[error("not enough rows to train: {0}")]
    EmptyTrainingSet(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// A differentiable regressor over flattened window batches.
pub trait Network: Clone + Send + Sync {
    type Cache;

    /// Row order the network expects for `B × L × d` batches.
    fn layout(&self) -> Layout;
    fn input_dim(&self) -> usize;
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;

    /// `x` holds `batch · L` rows of `input_dim` features in [`Self::layout`] order.
    fn forward(&self, x: ArrayView2<f64>, batch: usize) -> Result<(Vec<f64>, Self::Cache), DeepError>;

    /// Parameter gradients given `∂loss/∂ŷ` per sample.
    fn backward(&self, cache: &Self::Cache, d_y: &[f64]) -> ParamSet;

    fn predict(&self, x: ArrayView2<f64>, batch: usize) -> Result<Vec<f64>, DeepError> {
        Ok(self.forward(x, batch)?.0)
    }

    /// Mean squared error over the batch and its gradient.
    fn mse_grad(&self, x: ArrayView2<f64>, batch: usize, y: &[f64]) -> Result<(f64, ParamSet), DeepError> {
        if y.len() != batch {
            return Err(DeepError::ShapeMismatch(format!("{} targets for batch of {batch}", y.len())));
        }
        let (pred, cache) = self.forward(x, batch)?;
        let scale = 1.0 / batch as f64;
        let loss = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() * scale;
        let d_y: Vec<f64> = pred.iter().zip(y).map(|(p, t)| 2.0 * (p - t) * scale).collect();
        Ok((loss, self.backward(&cache, &d_y)))
    }
}

/// Validates a flattened batch and returns its window length.
fn check_batch(x: ArrayView2<f64>, batch: usize, input_dim: usize) -> Result<usize, DeepError> {
    if x.ncols() != input_dim {
        return Err(DeepError::ShapeMismatch(format!(
            "expected {input_dim} features, got {}",
            x.ncols()
        )));
    }
    if batch == 0 || x.nrows() == 0 || x.nrows() % batch != 0 {
        return Err(DeepError::ShapeMismatch(format!(
            "{} rows do not split into {batch} windows",
            x.nrows()
        )));
    }
    Ok(x.nrows() / batch)
}
