//! Four-qubit statevector simulator. Qubit `q` is bit `q` of the basis index.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const N_QUBITS: usize = 4;
pub const DIM: usize = 1 << N_QUBITS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "UPPERCASE")]
pub enum Gate {
    Ry { qubit: usize, angle: f64 },
    Rz { qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Ry { angle, .. } | Gate::Rz { angle, .. } => Some(angle),
            Gate::Cnot { .. } => None,
        }
    }

    /// Copy with the rotation angle shifted by `delta` (CNOT unchanged).
    pub fn shifted(self, delta: f64) -> Gate {
        match self {
            Gate::Ry { qubit, angle } => Gate::Ry { qubit, angle: angle + delta },
            Gate::Rz { qubit, angle } => Gate::Rz { qubit, angle: angle + delta },
            g => g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Statevector {
    pub amps: [Complex64; DIM],
}

impl Default for Statevector {
    fn default() -> Self {
        Self::zero()
    }
}

impl Statevector {
    /// |0000⟩
    pub fn zero() -> Self {
        let mut amps = [Complex64::new(0.0, 0.0); DIM];
        amps[0] = Complex64::new(1.0, 0.0);
        Statevector { amps }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&mut self, gate: &Gate) {
        match *gate {
            Gate::Ry { qubit, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let bit = 1 << qubit;
                for i in (0..DIM).filter(|i| i & bit == 0) {
                    let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                    self.amps[i] = a0 * c - a1 * s;
                    self.amps[i | bit] = a0 * s + a1 * c;
                }
            }
            Gate::Rz { qubit, angle } => {
                let phase = Complex64::from_polar(1.0, angle / 2.0);
                let bit = 1 << qubit;
                for (i, a) in self.amps.iter_mut().enumerate() {
                    *a *= if i & bit == 0 { phase.conj() } else { phase };
                }
            }
            Gate::Cnot { control, target } => {
                let (cb, tb) = (1 << control, 1 << target);
                for i in (0..DIM).filter(|i| i & cb != 0 && i & tb == 0) {
                    self.amps.swap(i, i | tb);
                }
            }
        }
        debug_assert!((self.norm_sqr() - 1.0).abs() < 1e-10, "gate {gate:?} broke normalization");
    }

    pub fn run(&mut self, gates: &[Gate]) {
        for g in gates {
            self.apply(g);
        }
    }

    /// ⟨Z_q⟩ = Σ_i ±|a_i|², negative where bit `q` is set.
    pub fn expectation_z(&self, qubit: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & (1 << qubit) == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }
}

/// RY(angle_q) on each qubit of |0000⟩.
pub fn encoding_gates(angles: &[f64; N_QUBITS]) -> Vec<Gate> {
    angles
        .iter()
        .enumerate()
        .map(|(qubit, &angle)| Gate::Ry { qubit, angle })
        .collect()
}

pub fn encode_state(angles: &[f64; N_QUBITS]) -> Statevector {
    let mut s = Statevector::zero();
    s.run(&encoding_gates(angles));
    s
}

/// Index of θ for (layer, qubit, rotation) with rotation 0 = RY, 1 = RZ.
pub fn theta_index(layer: usize, qubit: usize, rotation: usize) -> usize {
    (layer * N_QUBITS + qubit) * 2 + rotation
}

/// Per layer: RY then RZ on every qubit, then the CNOT ring 0→1→2→3→0.
/// `theta.len()` must be a multiple of `2 · N_QUBITS`.
pub fn variational_gates(theta: &[f64]) -> Vec<Gate> {
    assert_eq!(theta.len() % (2 * N_QUBITS), 0, "θ must hold whole layers");
    let layers = theta.len() / (2 * N_QUBITS);
    let mut gates = Vec::with_capacity(layers * 3 * N_QUBITS);
    for l in 0..layers {
        for q in 0..N_QUBITS {
            gates.push(Gate::Ry {
                qubit: q,
                angle: theta[theta_index(l, q, 0)],
            });
            gates.push(Gate::Rz {
                qubit: q,
                angle: theta[theta_index(l, q, 1)],
            });
        }
        for q in 0..N_QUBITS {
            gates.push(Gate::Cnot {
                control: q,
                target: (q + 1) % N_QUBITS,
            });
        }
    }
    gates
}

pub fn apply_variational(state: &mut Statevector, theta: &[f64]) {
    state.run(&variational_gates(theta));
}
