//! Mini-batch Adam training with validation early stopping.

use std::io::Write;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::window::gather_windows;
use super::{DeepError, Network};
use crate::seed;

const PREDICT_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Window length in rows.
    pub window: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Trailing share of training rows used for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window: 28,
            max_epochs: 100,
            patience: 10,
            batch_size: 32,
            adam: AdamConfig::default(),
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best epoch (numbered from 1) and stops once `patience`
/// epochs pass without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best_epoch: usize,
    best_loss: f64,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best_epoch: 0,
            best_loss: f64::INFINITY,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = epoch;
            StopDecision::Improved
        } else if epoch - self.best_epoch >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

/// Targets are standardized with training statistics before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: f64,
    /// Population std; a zero spread is stored as 1.
    pub std: f64,
}

impl TargetScaler {
    pub fn fit(y: &[f64]) -> Self {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let std = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        TargetScaler {
            mean,
            std: if std > 0.0 { std } else { 1.0 },
        }
    }

    pub fn forward(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Debug, Clone)]
pub struct TrainedNetwork<N> {
    pub net: N,
    pub window: usize,
    pub target: TargetScaler,
    pub curve: Vec<EpochRecord>,
    /// 0 when no epoch ran and the initialization was returned.
    pub best_epoch: usize,
}

impl<N: Network> TrainedNetwork<N> {
    /// Predictions for `rows` of `x`, each from the window ending at that row.
    pub fn predict_rows(&self, x: ArrayView2<f64>, rows: &[usize]) -> Result<Vec<f64>, DeepError> {
        let z = predict_standardized(&self.net, x, rows, self.window)?;
        Ok(z.into_iter().map(|v| self.target.inverse(v)).collect())
    }

    pub fn checkpoint(&self, kind: &str, config: serde_json::Value) -> Checkpoint {
        let p = self.net.params();
        Checkpoint {
            kind: kind.into(),
            config,
            input_dim: self.net.input_dim(),
            window: self.window,
            target: self.target,
            best_epoch: self.best_epoch,
            tensors: p
                .specs()
                .iter()
                .map(|s| NamedTensor {
                    name: s.name.clone(),
                    shape: s.shape,
                    data: p.as_slice()[s.offset..s.offset + s.len()].to_vec(),
                })
                .collect(),
        }
    }
}

fn predict_standardized<N: Network>(
    net: &N,
    x: ArrayView2<f64>,
    rows: &[usize],
    window: usize,
) -> Result<Vec<f64>, DeepError> {
    let mut out = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(PREDICT_CHUNK) {
        let batch = gather_windows(x, chunk, window, net.layout());
        out.extend(net.predict(batch.view(), chunk.len())?);
    }
    Ok(out)
}

/// Named-tensor container with the model configuration as a header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub kind: String,
    pub config: serde_json::Value,
    pub input_dim: usize,
    pub window: usize,
    pub target: TargetScaler,
    pub best_epoch: usize,
    pub tensors: Vec<NamedTensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl Checkpoint {
    /// Copies the stored tensors into a network of identical layout.
    pub fn restore<N: Network>(&self, mut net: N) -> Result<TrainedNetwork<N>, DeepError> {
        let specs = net.params().specs().to_vec();
        if specs.len() != self.tensors.len() {
            return Err(DeepError::Checkpoint(format!(
                "{} tensors stored, model has {}",
                self.tensors.len(),
                specs.len()
            )));
        }
        for (spec, t) in specs.iter().zip(&self.tensors) {
            if spec.name != t.name || spec.shape != t.shape || t.data.len() != spec.len() {
                return Err(DeepError::Checkpoint(format!("tensor `{}` does not match the model", t.name)));
            }
            net.params_mut().as_mut_slice()[spec.offset..spec.offset + spec.len()].copy_from_slice(&t.data);
        }
        Ok(TrainedNetwork {
            net,
            window: self.window,
            target: self.target,
            curve: Vec::new(),
            best_epoch: self.best_epoch,
        })
    }
}

pub fn write_curve_csv<W: Write>(curve: &[EpochRecord], writer: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["epoch", "train_loss", "valid_loss"])?;
    for r in curve {
        wtr.write_record([r.epoch.to_string(), r.train_loss.to_string(), r.valid_loss.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Trains on rows of `x` (already scaled) against `y`, holding out the
/// trailing `validation_fraction` of rows for early stopping. Windows may
/// reach back across the hold-out boundary; they never look forward.
pub fn train_network<N: Network>(
    net: N,
    x: ArrayView2<f64>,
    y: &[f64],
    config: &TrainConfig,
) -> Result<TrainedNetwork<N>, DeepError> {
    let n = x.nrows();
    if y.len() != n {
        return Err(DeepError::ShapeMismatch(format!("{n} rows but {} targets", y.len())));
    }
    if config.window == 0 || config.batch_size == 0 {
        return Err(DeepError::InvalidConfig("window and batch size must be positive".into()));
    }
    let n_valid = (n as f64 * config.validation_fraction).ceil() as usize;
    if n_valid == 0 || n_valid >= n {
        return Err(DeepError::EmptyTrainingSet(format!(
            "{n} rows cannot hold a {} validation share",
            config.validation_fraction
        )));
    }
    let n_fit = n - n_valid;
    let target = TargetScaler::fit(&y[..n_fit]);
    let z: Vec<f64> = y.iter().map(|&v| target.forward(v)).collect();
    let valid_rows: Vec<usize> = (n_fit..n).collect();

    let mut best_net = net.clone();
    let mut net = net;
    let mut adam = AdamState::new(net.params().len(), config.adam);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut rng = seed::rng(config.seed);
    let mut order: Vec<usize> = (0..n_fit).collect();
    let mut curve = Vec::new();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = gather_windows(x, chunk, config.window, net.layout());
            let targets: Vec<f64> = chunk.iter().map(|&r| z[r]).collect();
            let (loss, grads) = net.mse_grad(batch.view(), chunk.len(), &targets)?;
            if !loss.is_finite() {
                return Err(DeepError::Diverged { epoch });
            }
            adam.step_set(net.params_mut(), &grads);
            total += loss * chunk.len() as f64;
        }
        let pred = predict_standardized(&net, x, &valid_rows, config.window)?;
        let valid_loss = pred.iter().zip(&z[n_fit..]).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n_valid as f64;
        if !valid_loss.is_finite() || !net.params().is_finite() {
            return Err(DeepError::Diverged { epoch });
        }
        curve.push(EpochRecord {
            epoch,
            train_loss: total / n_fit as f64,
            valid_loss,
        });
        match stopper.observe(epoch, valid_loss) {
            StopDecision::Improved => best_net.clone_from(&net),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    Ok(TrainedNetwork {
        net: best_net,
        window: config.window,
        target,
        curve,
        best_epoch: stopper.best_epoch(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deep::{Lstm, LstmConfig, Transformer, TransformerConfig};
    use ndarray::Array2;
    use rand::Rng;

    #[test]
    fn strictly_worsening_curve_stops_at_eleven() {
        let mut s = EarlyStopping::new(10);
        let mut stopped = None;
        for epoch in 1..=100 {
            if s.observe(epoch, epoch as f64) == StopDecision::Stop {
                stopped = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped, Some(11));
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let net = Lstm::new(2, LstmConfig { hidden: 3, layers: 2, forget_bias: 1.0 }, &mut seed::rng(1)).unwrap();
        let x = Array2::from_shape_fn((40, 2), |(i, j)| (i + j) as f64 * 0.01);
        let y: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let cfg = TrainConfig { max_epochs: 0, window: 4, ..Default::default() };
        let trained = train_network(net.clone(), x.view(), &y, &cfg).unwrap();
        assert_eq!(trained.net, net);
        assert!(trained.curve.is_empty() && trained.best_epoch == 0);
    }

    #[test]
    fn lstm_learns_a_constant_target() {
        let net = Lstm::new(3, LstmConfig { hidden: 8, layers: 2, forget_bias: 1.0 }, &mut seed::rng(2)).unwrap();
        let mut rng = seed::rng(3);
        let x = Array2::from_shape_fn((50, 3), |_| rng.random_range(-1.0..1.0));
        let y = vec![1.0375; 50];
        let cfg = TrainConfig { window: 6, ..Default::default() };
        let trained = train_network(net, x.view(), &y, &cfg).unwrap();
        let rows: Vec<usize> = (0..45).collect();
        let pred = trained.predict_rows(x.view(), &rows).unwrap();
        assert!(pred.iter().all(|p| (p - 1.0375).abs() < 1e-2), "{pred:?}");
    }

    #[test]
    fn training_is_deterministic_and_checkpoints_round_trip() {
        let cfg = TransformerConfig {
            d_model: 8,
            heads: 2,
            blocks: 1,
            d_ff: 8,
            positional_encoding: true,
        };
        let mut rng = seed::rng(5);
        let x = Array2::from_shape_fn((60, 2), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..60).map(|i| x[[i, 0]] * 0.5 + 1.0).collect();
        let tcfg = TrainConfig { window: 5, max_epochs: 6, seed: 9, ..Default::default() };
        let run = || {
            let net = Transformer::new(2, cfg, &mut seed::rng(4)).unwrap();
            train_network(net, x.view(), &y, &tcfg).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.net, b.net);

        let ck = a.checkpoint("transformer", serde_json::to_value(cfg).unwrap());
        let json = serde_json::to_string(&ck).unwrap();
        let back: Checkpoint = serde_json::from_str(&json).unwrap();
        let fresh = Transformer::new(2, cfg, &mut seed::rng(99)).unwrap();
        let restored = back.restore(fresh).unwrap();
        assert_eq!(restored.net, a.net);

        let mut csv = Vec::new();
        write_curve_csv(&a.curve, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("epoch,train_loss,valid_loss\n1,"));
        assert_eq!(text.lines().count(), a.curve.len() + 1);
    }
}
