//! Engineered feature space: lags, rolling statistics, changes, balance
//! structure, RSI and calendar encodings, plus 24h-ahead targets and
//! train-fitted z-scoring.

mod export;
mod matrix;
mod scaler;
pub mod transforms;

use thiserror::Error;

pub use export::{column_manifest, write_feature_csv, ColumnEntry, ColumnManifest};
pub use matrix::{
    assemble_matrix, build_targets, check_columns, FeatureConfig, FeatureFamily, FeatureMatrix,
    LEAKAGE_BLACKLIST,
};
pub use scaler::{apply_scaler, fit_scaler, ScalerStats};
pub use transforms::{
    balance_metrics, change_signals, hours_to_steps, lag_features, rolling_stats, rsi,
    temporal_encodings, BalanceMetrics, Column,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("lag {lag} does not fit a series of length {len}")]
    LagExceedsSeries { lag: usize, len: usize },
    #[error("window {window} does not fit a series of length {len}")]
    WindowExceedsSeries { window: usize, len: usize },
    #[error("log change of `{column}` needs positive values (row {row})")]
    NonPositiveForLog { column: String, row: usize },
    #[error("series too short: need {needed} rows, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("scaler fitted on {expected} columns, got {found}")]
    ScalerColumnMismatch { expected: usize, found: usize },
    #[error("column `{0}` would leak identifiers or targets into the inputs")]
    LeakageColumn(String),
    #[error("duplicate feature column `{0}`")]
    DuplicateColumn(String),
    #[error("non-finite value in `{column}` at raw row {row}")]
    NonFinite { column: String, row: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("export failed: {0}")]
    Export(String),
}
