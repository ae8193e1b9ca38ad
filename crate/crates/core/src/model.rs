//! Uniform fit/predict dispatch over the six model families.

use std::path::Path;

use ndarray::{s, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::{fit_random_forest, fit_xgboost_chronological, BoostConfig, BoostedEnsemble, Forest, ForestConfig};
use crate::deep::{
    train_network, write_curve_csv, Lstm, LstmConfig, TrainConfig, TrainedNetwork, Transformer, TransformerConfig,
};
use crate::error::{Error, Result};
use crate::eval::{ModelId, Split};
use crate::features::{apply_scaler, fit_scaler, FeatureMatrix, ScalerStats};
use crate::ingest::{chronological_split, SplitIndex};
use crate::quantum::{
    circuit_dump_json, compress_rows, fit_kernel_regressor, train_qnn, write_gram_csv, KernelConfig, KernelModel,
    QnnConfig, QnnModel, N_QUBITS,
};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmSettings {
    pub network: LstmConfig,
    pub training: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformerSettings {
    pub network: TransformerConfig,
    pub training: TrainConfig,
}

impl Default for TransformerSettings {
    fn default() -> Self {
        TransformerSettings {
            network: TransformerConfig {
                d_ff: 128,
                ..TransformerConfig::default()
            },
            training: TrainConfig::default(),
        }
    }
}

/// Hyperparameters for every family. Seeds inside the blocks are replaced
/// by per-cell derived seeds at fit time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub random_forest: ForestConfig,
    pub xgboost: BoostConfig,
    pub lstm: LstmSettings,
    pub transformer: TransformerSettings,
    pub qnn: QnnConfig,
    pub qsvm_qnn: KernelConfig,
}

/// One pool's scaled feature matrix and its chronological split, shared
/// read-only by every model of the pool.
#[derive(Debug, Clone)]
pub struct PoolData {
    /// All usable rows, scaled with statistics fitted on the training rows.
    pub matrix: FeatureMatrix,
    pub split: SplitIndex,
    pub scaler: ScalerStats,
}

impl PoolData {
    pub fn prepare(raw: &FeatureMatrix, ratio: f64) -> Result<PoolData> {
        let split = chronological_split(raw.n_rows(), ratio)?;
        let scaler = fit_scaler(&raw.rows(split.train()))?;
        let matrix = apply_scaler(&scaler, raw)?;
        Ok(PoolData { matrix, split, scaler })
    }

    pub fn pool_id(&self) -> &str {
        &self.matrix.pool_id
    }

    pub fn x(&self, split: Split) -> ArrayView2<'_, f64> {
        let r = self.range(split);
        self.matrix.x.slice(s![r, ..])
    }

    pub fn y(&self, split: Split) -> &[f64] {
        &self.matrix.y[self.range(split)]
    }

    pub fn range(&self, split: Split) -> std::ops::Range<usize> {
        match split {
            Split::Train => self.split.train(),
            Split::Test => self.split.test(),
        }
    }

    /// SHA-256 over the column names, the scaled inputs and the targets.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.matrix.columns {
            h.update(c.as_bytes());
            h.update([0]);
        }
        for v in self.matrix.x.iter().chain(&self.matrix.y) {
            h.update(v.to_le_bytes());
        }
        h.update((self.split.train_end as u64).to_le_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    RandomForest(Forest),
    Xgboost(BoostedEnsemble),
    Lstm(TrainedNetwork<Lstm>),
    Transformer(TrainedNetwork<Transformer>),
    Qnn(QnnModel),
    QsvmQnn(KernelModel),
}

/// Derived seed for one (pool, model) cell.
pub fn cell_seed(run_seed: u64, pool_id: &str, model: ModelId) -> u64 {
    seed::derive_label(seed::derive_label(run_seed, pool_id), model.slug())
}

/// Fits `model` on the training rows of `data`.
pub fn fit_model(model: ModelId, data: &PoolData, config: &ModelsConfig, seed: u64) -> Result<TrainedModel> {
    let (x, y) = (data.x(Split::Train), data.y(Split::Train));
    let d = x.ncols();
    Ok(match model {
        ModelId::RandomForest => {
            let cfg = ForestConfig {
                seed,
                ..config.random_forest.clone()
            };
            TrainedModel::RandomForest(fit_random_forest(x, y, &cfg)?)
        }
        ModelId::Xgboost => TrainedModel::Xgboost(fit_xgboost_chronological(x, y, &config.xgboost)?),
        ModelId::Lstm => {
            let net = Lstm::new(d, config.lstm.network, &mut seed::rng(seed::derive(seed, 0)))?;
            let cfg = TrainConfig {
                seed: seed::derive(seed, 1),
                ..config.lstm.training.clone()
            };
            TrainedModel::Lstm(train_network(net, x, y, &cfg)?)
        }
        ModelId::Transformer => {
            let net = Transformer::new(d, config.transformer.network, &mut seed::rng(seed::derive(seed, 0)))?;
            let cfg = TrainConfig {
                seed: seed::derive(seed, 1),
                ..config.transformer.training.clone()
            };
            TrainedModel::Transformer(train_network(net, x, y, &cfg)?)
        }
        ModelId::Qnn => {
            let cfg = QnnConfig {
                seed,
                ..config.qnn.clone()
            };
            TrainedModel::Qnn(train_qnn(&compress_rows(x), y, &cfg)?)
        }
        ModelId::QsvmQnn => TrainedModel::QsvmQnn(fit_kernel_regressor(&compress_rows(x), y, &config.qsvm_qnn)?),
    })
}

impl TrainedModel {
    pub fn id(&self) -> ModelId {
        match self {
            TrainedModel::RandomForest(_) => ModelId::RandomForest,
            TrainedModel::Xgboost(_) => ModelId::Xgboost,
            TrainedModel::Lstm(_) => ModelId::Lstm,
            TrainedModel::Transformer(_) => ModelId::Transformer,
            TrainedModel::Qnn(_) => ModelId::Qnn,
            TrainedModel::QsvmQnn(_) => ModelId::QsvmQnn,
        }
    }

    /// Predictions for every row of one split. Sequence models read their
    /// windows from the full matrix, so early test windows reach back into
    /// training rows but never forward.
    pub fn predict(&self, data: &PoolData, split: Split) -> Result<Vec<f64>> {
        let x = data.x(split);
        let rows: Vec<usize> = data.range(split).collect();
        Ok(match self {
            TrainedModel::RandomForest(m) => m.predict(x)?,
            TrainedModel::Xgboost(m) => m.predict(x)?,
            TrainedModel::Lstm(m) => m.predict_rows(data.matrix.x.view(), &rows)?,
            TrainedModel::Transformer(m) => m.predict_rows(data.matrix.x.view(), &rows)?,
            TrainedModel::Qnn(m) => m.predict(&compress_rows(x)),
            TrainedModel::QsvmQnn(m) => m.predict(&compress_rows(x)),
        })
    }

    /// Writes the model's audit artifacts into `dir`. Returns the file names.
    pub fn write_artifacts(
        &self,
        dir: &Path,
        data: &PoolData,
        config: &ModelsConfig,
        save_models: bool,
        save_forest: bool,
    ) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            written.push(name.to_string());
            Ok(())
        };
        let curve = |c: &[crate::deep::EpochRecord]| -> Result<Vec<u8>> {
            let mut buf = Vec::new();
            write_curve_csv(c, &mut buf).map_err(|e| Error::Serde(e.to_string()))?;
            Ok(buf)
        };
        match self {
            TrainedModel::RandomForest(m) => {
                if save_forest {
                    put("model.json", json(m)?)?;
                }
            }
            TrainedModel::Xgboost(m) => {
                if save_models {
                    put("model.json", json(m)?)?;
                }
            }
            TrainedModel::Lstm(m) => {
                put("curve.csv", curve(&m.curve)?)?;
                if save_models {
                    let header = serde_json::to_value(&config.lstm).map_err(|e| Error::Serde(e.to_string()))?;
                    put("checkpoint.json", json(&m.checkpoint("lstm", header))?)?;
                }
            }
            TrainedModel::Transformer(m) => {
                put("curve.csv", curve(&m.curve)?)?;
                if save_models {
                    let header = serde_json::to_value(&config.transformer).map_err(|e| Error::Serde(e.to_string()))?;
                    put("checkpoint.json", json(&m.checkpoint("transformer", header))?)?;
                }
            }
            TrainedModel::Qnn(m) => {
                put("curve.csv", curve(&m.curve)?)?;
                let first: [f64; N_QUBITS] = compress_rows(data.x(Split::Test))
                    .first()
                    .copied()
                    .unwrap_or([0.0; N_QUBITS]);
                put("circuit.json", circuit_dump_json(&first, &m.params).into_bytes())?;
                if save_models {
                    put("model.json", json(m)?)?;
                }
            }
            TrainedModel::QsvmQnn(m) => {
                if save_models {
                    put("model.json", json(m)?)?;
                    if let Some(k) = &m.gram {
                        let mut buf = Vec::new();
                        write_gram_csv(k, &mut buf).map_err(|e| Error::Serde(e.to_string()))?;
                        put("gram.csv", buf)?;
                    }
                }
            }
        }
        Ok(written)
    }
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    serde_json::to_vec(v).map_err(|e| Error::Serde(e.to_string()))
}
