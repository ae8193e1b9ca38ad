//! Error and direction metrics, cross-pool aggregation, ranking and report
//! exports.

mod export;
mod metrics;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use export::{parse_markdown_table, read_pool_reports_csv, render_markdown, write_aggregate_csv, write_pool_reports_csv};
pub use metrics::{directional_accuracy, mae, metric_set, rmse, split_directional_accuracy, MetricSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("directional accuracy needs at least 2 points, got {n}")]
    TooShort { n: usize },
    #[error("standard deviation needs at least 2 pools, {model} has {pools}")]
    InsufficientPools { model: ModelId, pools: usize },
    #[error("non-finite prediction")]
    NonFinite,
    #[error("no reports to aggregate")]
    NoReports,
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("report parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    RandomForest,
    Xgboost,
    Lstm,
    Transformer,
    Qnn,
    QsvmQnn,
}

impl ModelId {
    pub const ALL: [ModelId; 6] = [
        ModelId::RandomForest,
        ModelId::Xgboost,
        ModelId::Lstm,
        ModelId::Transformer,
        ModelId::Qnn,
        ModelId::QsvmQnn,
    ];

    /// Short identifier used in file names, configs and CSVs.
    pub fn slug(self) -> &'static str {
        match self {
            ModelId::RandomForest => "random_forest",
            ModelId::Xgboost => "xgboost",
            ModelId::Lstm => "lstm",
            ModelId::Transformer => "transformer",
            ModelId::Qnn => "qnn",
            ModelId::QsvmQnn => "qsvm_qnn",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelId::RandomForest => "Random Forest",
            ModelId::Xgboost => "XGBoost",
            ModelId::Lstm => "LSTM",
            ModelId::Transformer => "Transformer",
            ModelId::Qnn => "QNN",
            ModelId::QsvmQnn => "QSVM-QNN",
        }
    }

    pub fn is_quantum(self) -> bool {
        matches!(self, ModelId::Qnn | ModelId::QsvmQnn)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for ModelId {
    type Err = EvalError;

    /// Accepts the slug, the display name, or a few common short forms.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.trim().to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        let id = match key.as_str() {
            "randomforest" | "rf" => ModelId::RandomForest,
            "xgboost" | "xgb" => ModelId::Xgboost,
            "lstm" => ModelId::Lstm,
            "transformer" => ModelId::Transformer,
            "qnn" => ModelId::Qnn,
            "qsvmqnn" | "qsvm" => ModelId::QsvmQnn,
            _ => return Err(EvalError::UnknownModel(s.to_string())),
        };
        Ok(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolReport {
    pub pool_id: String,
    pub model: ModelId,
    pub train: MetricSet,
    pub test: MetricSet,
}

impl PoolReport {
    pub fn split(&self, split: Split) -> &MetricSet {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }
}

/// Scores one trained model on both splits. Each split's direction metric
/// uses only that split's actuals.
pub fn evaluate(
    pool_id: &str,
    model: ModelId,
    train: (&[f64], &[f64]),
    test: (&[f64], &[f64]),
) -> Result<PoolReport, EvalError> {
    Ok(PoolReport {
        pool_id: pool_id.to_string(),
        model,
        train: metric_set(train.0, train.1)?,
        test: metric_set(test.0, test.1)?,
    })
}

/// Mean over pools, and the sample standard deviation when at least two pools exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: Option<f64>,
}

impl Stat {
    pub fn from_values(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() >= 2)
            .then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt());
        Stat { mean, std }
    }

    pub fn exact(mean: f64) -> Stat {
        Stat { mean, std: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mae: Stat,
    pub rmse: Stat,
    pub da: Stat,
}

impl MetricSummary {
    fn from_sets(sets: &[MetricSet]) -> MetricSummary {
        let col = |f: fn(&MetricSet) -> f64| Stat::from_values(&sets.iter().map(f).collect::<Vec<_>>());
        MetricSummary {
            mae: col(|m| m.mae),
            rmse: col(|m| m.rmse),
            da: col(|m| m.da),
        }
    }

    pub fn means(&self) -> MetricSet {
        MetricSet {
            mae: self.mae.mean,
            rmse: self.rmse.mean,
            da: self.da.mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAggregate {
    pub model: ModelId,
    pub pools: usize,
    pub train: MetricSummary,
    pub test: MetricSummary,
}

impl ModelAggregate {
    /// An aggregate row given only its means, e.g. a published table.
    pub fn from_means(model: ModelId, pools: usize, train: MetricSet, test: MetricSet) -> ModelAggregate {
        let s = |m: MetricSet| MetricSummary {
            mae: Stat::exact(m.mae),
            rmse: Stat::exact(m.rmse),
            da: Stat::exact(m.da),
        };
        ModelAggregate {
            model,
            pools,
            train: s(train),
            test: s(test),
        }
    }

    pub fn split(&self, split: Split) -> &MetricSummary {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    /// Sample standard deviations, or `InsufficientPools` below two pools.
    pub fn std(&self, split: Split) -> Result<MetricSet, EvalError> {
        let s = self.split(split);
        match (s.mae.std, s.rmse.std, s.da.std) {
            (Some(mae), Some(rmse), Some(da)) => Ok(MetricSet { mae, rmse, da }),
            _ => Err(EvalError::InsufficientPools {
                model: self.model,
                pools: self.pools,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    /// One entry per model, in [`ModelId`] order.
    pub models: Vec<ModelAggregate>,
}

impl AggregateReport {
    pub fn get(&self, model: ModelId) -> Option<&ModelAggregate> {
        self.models.iter().find(|m| m.model == model)
    }
}

/// Groups reports by model and summarizes each metric. Values are combined
/// in pool-id order, so the result does not depend on input order.
pub fn aggregate(reports: &[PoolReport]) -> Result<AggregateReport, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::NoReports);
    }
    let mut groups: BTreeMap<ModelId, Vec<&PoolReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.model).or_default().push(r);
    }
    let models = groups
        .into_iter()
        .map(|(model, mut rs)| {
            rs.sort_by(|a, b| a.pool_id.cmp(&b.pool_id));
            let train: Vec<MetricSet> = rs.iter().map(|r| r.train).collect();
            let test: Vec<MetricSet> = rs.iter().map(|r| r.test).collect();
            ModelAggregate {
                model,
                pools: rs.len(),
                train: MetricSummary::from_sets(&train),
                test: MetricSummary::from_sets(&test),
            }
        })
        .collect();
    Ok(AggregateReport { models })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub order: Vec<ModelId>,
}

/// Test directional accuracy descending, then test MAE ascending, then name.
pub fn rank(agg: &AggregateReport) -> Ranking {
    let mut rows: Vec<&ModelAggregate> = agg.models.iter().collect();
    rows.sort_by(|a, b| {
        b.test
            .da
            .mean
            .total_cmp(&a.test.da.mean)
            .then(a.test.mae.mean.total_cmp(&b.test.mae.mean))
            .then(a.model.display_name().cmp(b.model.display_name()))
    });
    Ranking {
        order: rows.into_iter().map(|m| m.model).collect(),
    }
}
