//! Regression trees, bagged forests and gradient-boosted ensembles.

mod boost;
mod forest;
mod tree;

use ndarray::ArrayView2;
use thiserror::Error;

pub use boost::{fit_boosting, fit_xgboost, fit_xgboost_chronological, BoostConfig, BoostedEnsemble};
pub use forest::{fit_random_forest, Forest, ForestConfig};
pub use tree::{fit_tree, fit_tree_presorted, Presorted, SplitObjective, Targets, TreeNode, TreeParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("{n} samples cannot fill two leaves of at least {min_samples_leaf}")]
    TooFewSamples { n: usize, min_samples_leaf: usize },
    #[error("expected {expected} columns, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("non-finite target or gradient")]
    NonFinite,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn check_dims(expected: usize, x: ArrayView2<f64>) -> Result<(), TreeError> {
    if x.ncols() != expected {
        return Err(TreeError::DimensionMismatch {
            expected,
            found: x.ncols(),
        });
    }
    Ok(())
}
