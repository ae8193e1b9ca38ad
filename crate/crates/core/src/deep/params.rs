//! Named 2-D tensors packed into one flat buffer.

use ndarray::{ArrayView2, ArrayViewMut2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DeepError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: [usize; 2],
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Handle to one tensor of a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorId(pub usize);

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSet {
    specs: Vec<TensorSpec>,
    data: Vec<f64>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> TensorId {
        let offset = self.data.len();
        self.specs.push(TensorSpec {
            name: name.into(),
            shape: [rows, cols],
            offset,
        });
        self.data.resize(offset + rows * cols, 0.0);
        TensorId(self.specs.len() - 1)
    }

    /// Same layout, all zeros.
    pub fn zeros_like(&self) -> Self {
        ParamSet {
            specs: self.specs.clone(),
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn find(&self, name: &str) -> Option<TensorId> {
        self.specs.iter().position(|s| s.name == name).map(TensorId)
    }

    pub fn get(&self, id: TensorId) -> ArrayView2<'_, f64> {
        let s = &self.specs[id.0];
        ArrayView2::from_shape((s.shape[0], s.shape[1]), &self.data[s.offset..s.offset + s.len()])
            .expect("tensor spec matches buffer")
    }

    pub fn get_mut(&mut self, id: TensorId) -> ArrayViewMut2<'_, f64> {
        let s = &self.specs[id.0];
        let (r, c, o, n) = (s.shape[0], s.shape[1], s.offset, s.len());
        ArrayViewMut2::from_shape((r, c), &mut self.data[o..o + n]).expect("tensor spec matches buffer")
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other`; layouts must match.
    pub fn axpy(&mut self, alpha: f64, other: &ParamSet) {
        debug_assert_eq!(self.specs, other.specs);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// Fills a tensor with U(−1/√fan_in, 1/√fan_in), fan_in being its row count.
    pub fn init_uniform<R: Rng>(&mut self, id: TensorId, rng: &mut R) {
        let bound = 1.0 / (self.specs[id.0].shape[0] as f64).sqrt();
        for v in self.get_mut(id).iter_mut() {
            *v = rng.random_range(-bound..=bound);
        }
    }

    pub fn fill(&mut self, id: TensorId, value: f64) {
        self.get_mut(id).fill(value);
    }

    pub fn check_layout(&self, other: &ParamSet) -> Result<(), DeepError> {
        if self.specs != other.specs {
            return Err(DeepError::Checkpoint("tensor layout does not match the model".into()));
        }
        Ok(())
    }
}
