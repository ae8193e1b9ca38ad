//! Variational circuit regressor: ŷ = w·⟨Z₀⟩ + b, trained with Adam on
//! parameter-shift gradients.

use std::f64::consts::FRAC_PI_2;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::state::{encoding_gates, variational_gates, Gate, Statevector, N_QUBITS};
use super::QuantumError;
use crate::deep::{AdamConfig, AdamState, EarlyStopping, EpochRecord, StopDecision, TargetScaler};
use crate::seed;

pub const READOUT_QUBIT: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// `layers × qubits × {RY, RZ}`, see [`super::theta_index`].
    pub theta: Vec<f64>,
    pub w: f64,
    pub b: f64,
}

impl CircuitParams {
    pub fn layers(&self) -> usize {
        self.theta.len() / (2 * N_QUBITS)
    }

    /// θ ~ U(−range, range), head at zero.
    pub fn init<R: Rng>(layers: usize, range: f64, rng: &mut R) -> Self {
        CircuitParams {
            theta: (0..layers * 2 * N_QUBITS).map(|_| rng.random_range(-range..range)).collect(),
            w: 0.0,
            b: 0.0,
        }
    }

    fn flat(&self) -> Vec<f64> {
        let mut v = self.theta.clone();
        v.push(self.w);
        v.push(self.b);
        v
    }

    fn set_flat(&mut self, v: &[f64]) {
        let n = self.theta.len();
        self.theta.copy_from_slice(&v[..n]);
        self.w = v[n];
        self.b = v[n + 1];
    }
}

/// Full gate list: encoding followed by the variational layers.
pub fn circuit_gates(angles: &[f64; N_QUBITS], theta: &[f64]) -> Vec<Gate> {
    let mut gates = encoding_gates(angles);
    gates.extend(variational_gates(theta));
    gates
}

/// ⟨Z₀⟩ of U_θ U_enc(x)|0⟩.
pub fn circuit_expectation(angles: &[f64; N_QUBITS], theta: &[f64]) -> f64 {
    let mut s = Statevector::zero();
    s.run(&circuit_gates(angles, theta));
    s.expectation_z(READOUT_QUBIT)
}

pub fn qnn_predict(angles: &[f64; N_QUBITS], params: &CircuitParams) -> f64 {
    params.w * circuit_expectation(angles, &params.theta) + params.b
}

/// Parameter-shift derivative of ⟨Z_qubit⟩ with respect to the angle of
/// each gate in `params`: ½[⟨Z⟩(φ + π/2) − ⟨Z⟩(φ − π/2)], each term a full
/// circuit evaluation.
pub fn shift_gradient(gates: &[Gate], params: &[usize], qubit: usize) -> Vec<f64> {
    let eval = |g: &[Gate]| {
        let mut s = Statevector::zero();
        s.run(g);
        s.expectation_z(qubit)
    };
    let mut shifted = gates.to_vec();
    params
        .iter()
        .map(|&k| {
            shifted[k] = gates[k].shifted(FRAC_PI_2);
            let plus = eval(&shifted);
            shifted[k] = gates[k].shifted(-FRAC_PI_2);
            let minus = eval(&shifted);
            shifted[k] = gates[k];
            0.5 * (plus - minus)
        })
        .collect()
}

/// ∂⟨Z₀⟩/∂θ for every variational angle, in θ order.
pub fn parameter_shift_grad(angles: &[f64; N_QUBITS], theta: &[f64]) -> Vec<f64> {
    let gates = circuit_gates(angles, theta);
    // Variational rotations follow the encoding gates; each layer is the
    // 2·N_QUBITS rotations (θ order) followed by the N_QUBITS ring CNOTs.
    let per_layer = 3 * N_QUBITS;
    let params: Vec<usize> = (0..theta.len())
        .map(|j| N_QUBITS + (j / (2 * N_QUBITS)) * per_layer + j % (2 * N_QUBITS))
        .collect();
    debug_assert!(params.iter().zip(theta).all(|(&k, &t)| gates[k].angle() == Some(t)));
    shift_gradient(&gates, &params, READOUT_QUBIT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QnnConfig {
    pub layers: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub init_range: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for QnnConfig {
    fn default() -> Self {
        QnnConfig {
            layers: 4,
            max_epochs: 100,
            patience: 10,
            batch_size: 32,
            learning_rate: 0.05,
            init_range: 0.1,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QnnModel {
    /// Parameters in standardized-target units.
    pub params: CircuitParams,
    pub target: TargetScaler,
    pub curve: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl QnnModel {
    pub fn predict(&self, angles: &[[f64; N_QUBITS]]) -> Vec<f64> {
        angles
            .par_iter()
            .map(|a| self.target.inverse(qnn_predict(a, &self.params)))
            .collect()
    }

    /// Head `(w, b)` in target units.
    pub fn price_head(&self) -> (f64, f64) {
        (
            self.params.w * self.target.std,
            self.target.mean + self.params.b * self.target.std,
        )
    }
}

/// Loss and gradient over (θ, w, b) for one batch of standardized targets.
fn batch_grad(params: &CircuitParams, angles: &[[f64; N_QUBITS]], z: &[f64]) -> (f64, Vec<f64>) {
    let n_theta = params.theta.len();
    let per_sample: Vec<(f64, Vec<f64>)> = angles
        .par_iter()
        .zip(z)
        .map(|(a, &t)| {
            let e = circuit_expectation(a, &params.theta);
            let resid = params.w * e + params.b - t;
            let mut g = Vec::with_capacity(n_theta + 2);
            if params.w != 0.0 {
                g.extend(parameter_shift_grad(a, &params.theta).into_iter().map(|d| 2.0 * resid * params.w * d));
            } else {
                g.resize(n_theta, 0.0);
            }
            g.push(2.0 * resid * e);
            g.push(2.0 * resid);
            (resid * resid, g)
        })
        .collect();
    let scale = 1.0 / z.len() as f64;
    let mut grad = vec![0.0; n_theta + 2];
    let mut loss = 0.0;
    for (l, g) in &per_sample {
        loss += l;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    grad.iter_mut().for_each(|g| *g *= scale);
    (loss * scale, grad)
}

fn mse(params: &CircuitParams, angles: &[[f64; N_QUBITS]], z: &[f64]) -> f64 {
    let sq: Vec<f64> = angles
        .par_iter()
        .zip(z)
        .map(|(a, &t)| (qnn_predict(a, params) - t).powi(2))
        .collect();
    sq.iter().sum::<f64>() / z.len() as f64
}

/// Trains on compressed inputs with the trailing `validation_fraction` of
/// rows held out for early stopping.
pub fn train_qnn(angles: &[[f64; N_QUBITS]], y: &[f64], config: &QnnConfig) -> Result<QnnModel, QuantumError> {
    let n = angles.len();
    if y.len() != n {
        return Err(QuantumError::InvalidInput(format!("{n} inputs but {} targets", y.len())));
    }
    if config.layers == 0 || config.batch_size == 0 {
        return Err(QuantumError::InvalidInput("layers and batch size must be positive".into()));
    }
    let n_valid = (n as f64 * config.validation_fraction).ceil() as usize;
    if n_valid == 0 || n_valid >= n {
        return Err(QuantumError::EmptyTrainingSet);
    }
    let n_fit = n - n_valid;
    let target = TargetScaler::fit(&y[..n_fit]);
    let z: Vec<f64> = y.iter().map(|&v| target.forward(v)).collect();

    let mut rng = seed::rng(config.seed);
    let mut params = CircuitParams::init(config.layers, config.init_range, &mut rng);
    let mut best = params.clone();
    let mut flat = params.flat();
    let mut adam = AdamState::new(
        flat.len(),
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut stopper = EarlyStopping::new(config.patience);
    let mut order: Vec<usize> = (0..n_fit).collect();
    let mut curve = Vec::new();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let a: Vec<[f64; N_QUBITS]> = chunk.iter().map(|&i| angles[i]).collect();
            let t: Vec<f64> = chunk.iter().map(|&i| z[i]).collect();
            let (loss, grad) = batch_grad(&params, &a, &t);
            if !loss.is_finite() {
                return Err(QuantumError::Diverged { epoch });
            }
            adam.step(&mut flat, &grad);
            params.set_flat(&flat);
            total += loss * chunk.len() as f64;
        }
        let valid_loss = mse(&params, &angles[n_fit..], &z[n_fit..]);
        if !valid_loss.is_finite() {
            return Err(QuantumError::Diverged { epoch });
        }
        curve.push(EpochRecord {
            epoch,
            train_loss: total / n_fit as f64,
            valid_loss,
        });
        match stopper.observe(epoch, valid_loss) {
            StopDecision::Improved => best.clone_from(&params),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    Ok(QnnModel {
        params: best,
        target,
        curve,
        best_epoch: stopper.best_epoch(),
    })
}
