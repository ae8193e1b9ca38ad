use serde::{Deserialize, Serialize};

use super::IngestError;

/// A chronological hold-out: rows `0..train_end` train, `train_end..total` test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub train_end: usize,
    pub total: usize,
    pub ratio: f64,
}

impl SplitIndex {
    pub fn train(&self) -> std::ops::Range<usize> {
        0..self.train_end
    }

    pub fn test(&self) -> std::ops::Range<usize> {
        self.train_end..self.total
    }

    pub fn test_len(&self) -> usize {
        self.total - self.train_end
    }
}

pub fn chronological_split(n_rows: usize, ratio: f64) -> Result<SplitIndex, IngestError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(IngestError::InvalidRatio(ratio));
    }
    let train_end = (ratio * n_rows as f64).floor() as usize;
    if train_end == 0 || train_end >= n_rows {
        return Err(IngestError::DegenerateSplit { n_rows, ratio });
    }
    Ok(SplitIndex {
        train_end,
        total: n_rows,
        ratio,
    })
}
