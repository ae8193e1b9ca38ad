//! Four-qubit circuit models: a variational regressor with a trainable
//! affine readout and a fidelity-kernel ridge regressor.

mod kernel;
mod qnn;
mod state;

use ndarray::ArrayView2;
use serde::Serialize;
use thiserror::Error;

pub use kernel::{fit_kernel_regressor, gram_matrix, quantum_kernel, write_gram_csv, KernelConfig, KernelModel};
pub use qnn::{
    circuit_expectation, circuit_gates, parameter_shift_grad, qnn_predict, shift_gradient, train_qnn, CircuitParams,
    QnnConfig, QnnModel, READOUT_QUBIT,
};
pub use state::{
    apply_variational, encode_state, encoding_gates, theta_index, variational_gates, Gate, Statevector, DIM,
    N_QUBITS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("kernel system is singular")]
    SingularSystem,
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },
    #[error("not enough rows to train")]
    EmptyTrainingSet,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Column ranges of the four contiguous blocks, as even as integer division allows.
pub fn compression_blocks(d: usize) -> [std::ops::Range<usize>; N_QUBITS] {
    std::array::from_fn(|q| q * d / N_QUBITS..(q + 1) * d / N_QUBITS)
}

/// Mean of each column block mapped to an angle π·tanh(mean). An empty
/// block (fewer than four columns) encodes as 0.
pub fn compress_features(x: &[f64]) -> [f64; N_QUBITS] {
    compression_blocks(x.len()).map(|r| {
        if r.is_empty() {
            0.0
        } else {
            let mean = x[r.clone()].iter().sum::<f64>() / r.len() as f64;
            std::f64::consts::PI * mean.tanh()
        }
    })
}

pub fn compress_rows(x: ArrayView2<f64>) -> Vec<[f64; N_QUBITS]> {
    x.rows()
        .into_iter()
        .map(|row| match row.as_slice() {
            Some(s) => compress_features(s),
            None => compress_features(&row.to_vec()),
        })
        .collect()
}

/// Audit dump of the full circuit for one input.
#[derive(Debug, Serialize)]
pub struct CircuitDump<'a> {
    pub qubits: usize,
    pub layers: usize,
    pub readout_qubit: usize,
    pub head_w: f64,
    pub head_b: f64,
    pub gates: &'a [Gate],
}

pub fn circuit_dump_json(angles: &[f64; N_QUBITS], params: &CircuitParams) -> String {
    let gates = circuit_gates(angles, &params.theta);
    serde_json::to_string_pretty(&CircuitDump {
        qubits: N_QUBITS,
        layers: params.layers(),
        readout_qubit: READOUT_QUBIT,
        head_w: params.w,
        head_b: params.b,
        gates: &gates,
    })
    .expect("gate lists serialize")
}
