//! Fidelity kernel K(x, x′) = |⟨ψ(x)|ψ(x′)⟩|² and centered kernel ridge
//! regression on top of it.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::state::{encode_state, Statevector, N_QUBITS};
use super::QuantumError;

pub fn quantum_kernel(x: &[f64; N_QUBITS], x2: &[f64; N_QUBITS]) -> f64 {
    encode_state(x).inner(&encode_state(x2)).norm_sqr()
}

fn kernel_from_states(a: &Statevector, b: &Statevector) -> f64 {
    a.inner(b).norm_sqr()
}

/// Symmetric Gram matrix, row-major `m × m`.
pub fn gram_matrix(xs: &[[f64; N_QUBITS]]) -> DMatrix<f64> {
    let states: Vec<Statevector> = xs.iter().map(encode_state).collect();
    let m = xs.len();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (0..m).map(|j| if j < i { 0.0 } else { kernel_from_states(&states[i], &states[j]) }).collect())
        .collect();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            k[(i, j)] = rows[i][j];
            k[(j, i)] = rows[i][j];
        }
    }
    k
}

pub fn write_gram_csv<W: Write>(k: &DMatrix<f64>, writer: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    for i in 0..k.nrows() {
        wtr.write_record(k.row(i).iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub ridge: f64,
    /// Only the most recent `max_support` training rows become support points.
    pub max_support: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            ridge: 1e-3,
            max_support: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub support: Vec<[f64; N_QUBITS]>,
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub ridge: f64,
    #[serde(skip)]
    pub gram: Option<DMatrix<f64>>,
}

/// Solves `(K + λI)α = y − b` with `b = mean(y)` by Cholesky factorization,
/// using the trailing `max_support` rows.
pub fn fit_kernel_regressor(xs: &[[f64; N_QUBITS]], y: &[f64], config: &KernelConfig) -> Result<KernelModel, QuantumError> {
    if xs.len() != y.len() {
        return Err(QuantumError::InvalidInput(format!("{} inputs but {} targets", xs.len(), y.len())));
    }
    if xs.is_empty() || config.max_support == 0 {
        return Err(QuantumError::EmptyTrainingSet);
    }
    if !(config.ridge >= 0.0) {
        return Err(QuantumError::InvalidInput(format!("ridge must be non-negative, got {}", config.ridge)));
    }
    let start = xs.len().saturating_sub(config.max_support);
    let (xs, y) = (&xs[start..], &y[start..]);
    let m = xs.len();
    let bias = y.iter().sum::<f64>() / m as f64;
    let gram = gram_matrix(xs);
    let mut system = gram.clone();
    for i in 0..m {
        system[(i, i)] += config.ridge;
    }
    let max_diag = (0..m).map(|i| system[(i, i)]).fold(0.0, f64::max);
    let chol = system.cholesky().ok_or(QuantumError::SingularSystem)?;
    // Reject numerically rank-deficient factorizations.
    let l = chol.l_dirty();
    if (0..m).any(|i| l[(i, i)] * l[(i, i)] <= 1e-12 * max_diag) {
        return Err(QuantumError::SingularSystem);
    }
    let rhs = DVector::from_iterator(m, y.iter().map(|v| v - bias));
    let alpha = chol.solve(&rhs);
    Ok(KernelModel {
        support: xs.to_vec(),
        alpha: alpha.iter().copied().collect(),
        bias,
        ridge: config.ridge,
        gram: Some(gram),
    })
}

impl KernelModel {
    /// f(x) = Σ α_i K(x, x_i) + b
    pub fn predict(&self, xs: &[[f64; N_QUBITS]]) -> Vec<f64> {
        let support: Vec<Statevector> = self.support.iter().map(encode_state).collect();
        xs.par_iter()
            .map(|x| {
                let s = encode_state(x);
                self.bias
                    + support
                        .iter()
                        .zip(&self.alpha)
                        .map(|(sv, a)| a * kernel_from_states(&s, sv))
                        .sum::<f64>()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;
    use std::f64::consts::PI;

    fn points(n: usize, s: u64) -> Vec<[f64; 4]> {
        let mut rng = seed::rng(s);
        (0..n).map(|_| [(); 4].map(|_| rng.random_range(-PI..PI))).collect()
    }

    /// Product-state closed form: Π_q cos²((a_q − b_q)/2).
    fn closed_form(a: &[f64; 4], b: &[f64; 4]) -> f64 {
        a.iter().zip(b).map(|(x, y)| ((x - y) / 2.0).cos().powi(2)).product()
    }

    /// Plain Gaussian elimination with partial pivoting.
    fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in col + 1..n {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn kernel_examples() {
        let x = [0.3, -1.2, 2.2, 0.9];
        assert!((quantum_kernel(&x, &x) - 1.0).abs() < 1e-12);
        assert!(quantum_kernel(&[0.0; 4], &[PI, 0.0, 0.0, 0.0]) < 1e-30);
        let pts = points(20, 1);
        for a in &pts {
            for b in &pts {
                assert!((quantum_kernel(a, b) - closed_form(a, b)).abs() < 1e-12);
                assert!((quantum_kernel(a, b) - quantum_kernel(b, a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_is_symmetric_unit_diagonal_psd() {
        let k = gram_matrix(&points(16, 2));
        for i in 0..16 {
            assert!((k[(i, i)] - 1.0).abs() < 1e-10);
            for j in 0..16 {
                assert!((k[(i, j)] - k[(j, i)]).abs() < 1e-12);
            }
        }
        let min_eig = k.symmetric_eigenvalues().min();
        assert!(min_eig >= -1e-8, "{min_eig}");
    }

    #[test]
    fn constant_target_gives_zero_weights() {
        let xs = points(30, 3);
        let m = fit_kernel_regressor(&xs, &[2.5; 30], &KernelConfig::default()).unwrap();
        assert_eq!(m.bias, 2.5);
        assert!(m.alpha.iter().all(|&a| a == 0.0));
        assert!(m.predict(&points(5, 4)).iter().all(|&p| p == 2.5));
    }

    #[test]
    fn heavy_ridge_shrinks_to_mean() {
        let xs = points(25, 5);
        let y: Vec<f64> = xs.iter().map(|x| x[0].sin() + 3.0).collect();
        let mean = y.iter().sum::<f64>() / 25.0;
        let m = fit_kernel_regressor(&xs, &y, &KernelConfig { ridge: 1e9, max_support: 256 }).unwrap();
        assert!(m.predict(&points(10, 6)).iter().all(|p| (p - mean).abs() < 1e-6));
    }

    #[test]
    fn small_ridge_interpolates_like_dense_solve() {
        let xs = points(16, 7);
        let y: Vec<f64> = xs.iter().map(|x| x[0].cos() * 0.2 + x[1] * 0.05 + 1.0).collect();
        let cfg = KernelConfig { ridge: 1e-6, max_support: 256 };
        let m = fit_kernel_regressor(&xs, &y, &cfg).unwrap();
        let pred = m.predict(&xs);
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-3);
        }
        let b = y.iter().sum::<f64>() / 16.0;
        let a: Vec<Vec<f64>> = (0..16)
            .map(|i| (0..16).map(|j| closed_form(&xs[i], &xs[j]) + if i == j { 1e-6 } else { 0.0 }).collect())
            .collect();
        let oracle = solve_dense(a, y.iter().map(|v| v - b).collect());
        for (u, v) in m.alpha.iter().zip(&oracle) {
            assert!((u - v).abs() <= 1e-6 * (1.0 + v.abs()), "{u} vs {v}");
        }
    }

    #[test]
    fn rank_deficient_without_ridge_is_singular() {
        let mut xs = points(6, 8);
        xs.push(xs[0]);
        let y: Vec<f64> = (0..7).map(f64::from).collect();
        let r = fit_kernel_regressor(&xs, &y, &KernelConfig { ridge: 0.0, max_support: 256 });
        assert_eq!(r.unwrap_err(), QuantumError::SingularSystem);
    }

    #[test]
    fn support_is_capped_to_recent_rows() {
        let xs = points(40, 9);
        let y: Vec<f64> = (0..40).map(f64::from).collect();
        let m = fit_kernel_regressor(&xs, &y, &KernelConfig { ridge: 1e-3, max_support: 10 }).unwrap();
        assert_eq!(m.support, xs[30..].to_vec());
        assert_eq!(m.bias, 34.5);
    }

    #[test]
    fn gram_csv_has_one_row_per_point() {
        let k = gram_matrix(&points(3, 10));
        let mut out = Vec::new();
        write_gram_csv(&k, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("1,"));
    }
}
