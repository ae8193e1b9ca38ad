use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mae: f64,
    pub rmse: f64,
    /// Directional accuracy as a fraction in [0, 1].
    pub da: f64,
}

fn check(y: &[f64], yhat: &[f64]) -> Result<(), EvalError> {
    if y.len() != yhat.len() {
        return Err(EvalError::LengthMismatch {
            left: y.len(),
            right: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check(y, yhat)?;
    Ok((y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64).sqrt())
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Fraction of positions where `sgn(y_i − prev_i) == sgn(ŷ_i − prev_i)`.
/// `sgn(0) = 0`, so a flat actual move only matches a flat prediction.
pub fn directional_accuracy(y: &[f64], yhat: &[f64], prev: &[f64]) -> Result<f64, EvalError> {
    check(y, yhat)?;
    check(y, prev)?;
    let hits = (0..y.len())
        .filter(|&i| sign(y[i] - prev[i]) == sign(yhat[i] - prev[i]))
        .count();
    Ok(hits as f64 / y.len() as f64)
}

/// Directional accuracy within one split: the previous actual comes from the
/// same split, so the first point is skipped.
pub fn split_directional_accuracy(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check(y, yhat)?;
    if y.len() < 2 {
        return Err(EvalError::TooShort { n: y.len() });
    }
    directional_accuracy(&y[1..], &yhat[1..], &y[..y.len() - 1])
}

pub fn metric_set(y: &[f64], yhat: &[f64]) -> Result<MetricSet, EvalError> {
    if yhat.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    Ok(MetricSet {
        mae: mae(y, yhat)?,
        rmse: rmse(y, yhat)?,
        da: split_directional_accuracy(y, yhat)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn error_examples() {
        assert_eq!((mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap()), (0.0, 0.0));
        assert_eq!(mae(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 2.0);
        assert_eq!(rmse(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 5f64.sqrt());
        assert_eq!((mae(&[2.0], &[-1.5]).unwrap(), rmse(&[2.0], &[-1.5]).unwrap()), (3.5, 3.5));
        assert_eq!(mae(&[], &[]), Err(EvalError::EmptyInput));
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn equal_errors_give_equal_mae_and_rmse() {
        let y = [1.0, 5.0, -2.0];
        let yhat = [1.5, 5.5, -1.5];
        assert!((rmse(&y, &yhat).unwrap() - mae(&y, &yhat).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn direction_examples() {
        assert_eq!(split_directional_accuracy(&[1.0, 2.0, 1.0], &[9.0, 2.5, 1.5]).unwrap(), 1.0);
        // Predicting the previous actual never matches a move.
        let y = [1.0, 2.0, 1.5, 3.0];
        let naive = [0.0, 1.0, 2.0, 1.5];
        assert_eq!(split_directional_accuracy(&y, &naive).unwrap(), 0.0);
        assert_eq!(split_directional_accuracy(&[4.0; 5], &[4.0; 5]).unwrap(), 1.0);
        assert_eq!(split_directional_accuracy(&[1.0], &[1.0]), Err(EvalError::TooShort { n: 1 }));
    }

    fn naive_mae(y: &[f64], yhat: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..y.len() {
            let d = y[i] - yhat[i];
            total += if d < 0.0 { -d } else { d };
        }
        total / y.len() as f64
    }

    fn naive_rmse(y: &[f64], yhat: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..y.len() {
            total += (y[i] - yhat[i]).powi(2);
        }
        (total / y.len() as f64).sqrt()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn errors_match_naive_loops(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)
        ) {
            let (y, yhat): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (m, r) = (mae(&y, &yhat).unwrap(), rmse(&y, &yhat).unwrap());
            prop_assert!((m - naive_mae(&y, &yhat)).abs() <= 1e-12 * (1.0 + m));
            prop_assert!((r - naive_rmse(&y, &yhat)).abs() <= 1e-12 * (1.0 + r));
        }
    }

    proptest! {
        #[test]
        fn direction_survives_monotone_transforms(s in 0u64..100_000, n in 2usize..60) {
            let mut rng = seed::rng(s);
            let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8u8))).collect();
            let yhat: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8u8))).collect();
            let f = |v: f64| (v * 0.5).exp() * 3.0 - 1.0;
            let ty: Vec<f64> = y.iter().map(|&v| f(v)).collect();
            let th: Vec<f64> = yhat.iter().map(|&v| f(v)).collect();
            prop_assert_eq!(
                split_directional_accuracy(&y, &yhat).unwrap(),
                split_directional_accuracy(&ty, &th).unwrap()
            );
        }
    }
}
