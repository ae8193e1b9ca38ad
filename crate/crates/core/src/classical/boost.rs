//! Second-order additive tree boosting with squared loss.

use ndarray::{s, ArrayView2};
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_presorted, Presorted, SplitObjective, Targets, TreeNode, TreeParams};
use super::{check_dims, TreeError};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub max_depth: usize,
    /// Candidate learning rates; the one with the lowest validation RMSE wins.
    pub learning_rates: Vec<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub n_rounds: usize,
    pub early_stopping_rounds: usize,
    /// Trailing share of training rows held out for early stopping.
    pub validation_fraction: f64,
    pub min_samples_leaf: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            max_depth: 6,
            learning_rates: vec![0.03, 0.1, 0.3],
            lambda: 1.0,
            gamma: 0.0,
            n_rounds: 500,
            early_stopping_rounds: 10,
            validation_fraction: 0.1,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub base_score: f64,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub max_depth: usize,
    pub n_features: usize,
    /// Trees kept for prediction (the first `best_iteration` rounds).
    pub trees: Vec<TreeNode>,
    pub best_iteration: usize,
    /// Rounds actually trained before stopping.
    pub rounds_trained: usize,
    /// Validation RMSE after each round; entry 0 is the base score alone.
    pub validation_rmse: Vec<f64>,
}

impl BoostedEnsemble {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, TreeError> {
        check_dims(self.n_features, x)?;
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                let row = row.to_vec();
                self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>()
            })
            .collect())
    }

    /// True when no round improved on the base score.
    pub fn no_improvement(&self) -> bool {
        self.best_iteration == 0
    }
}

fn rmse(pred: &[f64], y: &[f64]) -> f64 {
    (pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64).sqrt()
}

fn validate(x: ArrayView2<f64>, y: &[f64]) -> Result<(), TreeError> {
    if x.nrows() == 0 {
        return Err(TreeError::EmptyTrainingSet);
    }
    if y.len() != x.nrows() {
        return Err(TreeError::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    Ok(())
}

/// Fixed-rate boosting. With a validation set, rounds stop once validation
/// RMSE has not improved for `early_stopping_rounds` and the ensemble is cut
/// back to its best round; without one, all `n_rounds` are kept.
pub fn fit_boosting(
    x: ArrayView2<f64>,
    y: &[f64],
    valid: Option<(ArrayView2<f64>, &[f64])>,
    eta: f64,
    config: &BoostConfig,
) -> Result<BoostedEnsemble, TreeError> {
    validate(x, y)?;
    if let Some((xv, yv)) = valid {
        validate(xv, yv).map_err(|_| TreeError::EmptyValidation)?;
        check_dims(x.ncols(), xv)?;
    }
    if !(eta > 0.0) {
        return Err(TreeError::InvalidParameter(format!("learning rate must be positive, got {eta}")));
    }
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let params = TreeParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        max_features: None,
        objective: SplitObjective::Gradient {
            lambda: config.lambda,
            gamma: config.gamma,
        },
    };
    let data = Presorted::all_rows(x);
    let train_rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let valid_rows: Vec<Vec<f64>> = valid
        .map(|(xv, _)| xv.rows().into_iter().map(|r| r.to_vec()).collect())
        .unwrap_or_default();
    let mut pred = vec![base; n];
    let mut vpred = vec![base; valid_rows.len()];
    let hess = vec![1.0; n];
    let mut grad = vec![0.0; n];
    let mut trees = Vec::new();
    let mut curve = Vec::new();
    let mut best = (0usize, f64::INFINITY);
    if let Some((_, yv)) = valid {
        best.1 = rmse(&vpred, yv);
        curve.push(best.1);
    }
    // The split search never consults the RNG without feature subsampling.
    let mut rng = seed::rng(0);
    for round in 1..=config.n_rounds {
        for i in 0..n {
            grad[i] = pred[i] - y[i];
        }
        let tree = fit_tree_presorted(&data, Targets::Gradient { grad: &grad, hess: &hess }, &params, &mut rng)?;
        for (p, row) in pred.iter_mut().zip(&train_rows) {
            *p += eta * tree.predict_row(row);
        }
        trees.push(tree);
        if let Some((_, yv)) = valid {
            for (p, row) in vpred.iter_mut().zip(&valid_rows) {
                *p += eta * trees[round - 1].predict_row(row);
            }
            let score = rmse(&vpred, yv);
            curve.push(score);
            if score < best.1 {
                best = (round, score);
            } else if round - best.0 >= config.early_stopping_rounds {
                break;
            }
        } else {
            best.0 = round;
        }
    }
    let rounds_trained = trees.len();
    trees.truncate(best.0);
    Ok(BoostedEnsemble {
        base_score: base,
        learning_rate: eta,
        lambda: config.lambda,
        gamma: config.gamma,
        max_depth: config.max_depth,
        n_features: x.ncols(),
        trees,
        best_iteration: best.0,
        rounds_trained,
        validation_rmse: curve,
    })
}

/// Fits one early-stopped ensemble per candidate learning rate and keeps the
/// one with the lowest best validation RMSE (ties go to the earlier rate).
pub fn fit_xgboost(
    x: ArrayView2<f64>,
    y: &[f64],
    valid: (ArrayView2<f64>, &[f64]),
    config: &BoostConfig,
) -> Result<BoostedEnsemble, TreeError> {
    if config.learning_rates.is_empty() {
        return Err(TreeError::InvalidParameter("empty learning-rate grid".into()));
    }
    let mut best: Option<(f64, BoostedEnsemble)> = None;
    for &eta in &config.learning_rates {
        let model = fit_boosting(x, y, Some(valid), eta, config)?;
        let score = model.validation_rmse[model.best_iteration];
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, model));
        }
    }
    Ok(best.expect("grid is non-empty").1)
}

/// Holds out the trailing `validation_fraction` of the (chronological) rows
/// for early stopping and fits on the rest.
pub fn fit_xgboost_chronological(x: ArrayView2<f64>, y: &[f64], config: &BoostConfig) -> Result<BoostedEnsemble, TreeError> {
    validate(x, y)?;
    let n = y.len();
    let n_valid = ((n as f64) * config.validation_fraction).ceil() as usize;
    if n_valid == 0 || n_valid >= n {
        return Err(TreeError::EmptyValidation);
    }
    let cut = n - n_valid;
    fit_xgboost(
        x.slice(s![..cut, ..]),
        &y[..cut],
        (x.slice(s![cut.., ..]), &y[cut..]),
        config,
    )
}
