//! Forecasting benchmark for liquidity-pool virtual prices.
//!
//! Pool snapshots are ingested and aligned to a 6-hour grid, turned into a
//! causal feature matrix, and fed to six model families (random forest,
//! boosted trees, LSTM, Transformer encoder, a variational circuit and a
//! fidelity-kernel regressor). Every model sees identical chronological
//! splits; results are aggregated across pools and ranked.

pub mod classical;
pub mod deep;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod model;
pub mod quantum;
pub mod runner;
pub mod seed;

pub use error::{Error, Result};
pub use eval::{AggregateReport, MetricSet, ModelId, PoolReport, Ranking, Split};
pub use features::{FeatureConfig, FeatureMatrix};
pub use ingest::{PoolSeries, RawRecord};
pub use model::{fit_model, ModelsConfig, PoolData, TrainedModel};
pub use runner::{run_benchmark, run_grid, RunConfig, RunManifest, RunOutput};
