//! Bagged regression forests.

use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_presorted, Presorted, SplitObjective, Targets, TreeNode, TreeParams};
use super::{check_dims, TreeError};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// Features tried per split; `None` means `ceil(d / 3)`.
    pub max_features: Option<usize>,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 150,
            bootstrap: true,
            max_features: None,
            max_depth: 24,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
    pub n_features: usize,
    pub bootstrap_seed: u64,
}

pub fn fit_random_forest(x: ArrayView2<f64>, y: &[f64], config: &ForestConfig) -> Result<Forest, TreeError> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(TreeError::EmptyTrainingSet);
    }
    if y.len() != n {
        return Err(TreeError::DimensionMismatch { expected: n, found: y.len() });
    }
    if config.n_trees == 0 {
        return Err(TreeError::InvalidParameter("n_trees must be positive".into()));
    }
    let params = TreeParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        max_features: Some(config.max_features.unwrap_or(d.div_ceil(3)).clamp(1, d.max(1))),
        objective: SplitObjective::Variance,
    };
    let all_rows: Option<Presorted> = (!config.bootstrap).then(|| Presorted::all_rows(x));
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(config.seed, t as u64));
            match &all_rows {
                Some(data) => fit_tree_presorted(data, Targets::Raw(y), &params, &mut rng),
                None => {
                    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    let data = Presorted::new(x, &rows);
                    fit_tree_presorted(&data, Targets::Raw(y), &params, &mut rng)
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Forest {
        trees,
        n_features: d,
        bootstrap_seed: config.seed,
    })
}

impl Forest {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, TreeError> {
        check_dims(self.n_features, x)?;
        let n = self.trees.len() as f64;
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                let row = row.to_vec();
                self.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>() / n
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::tree::fit_tree;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::Rng;

    fn data(n: usize, d: usize, s: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = seed::rng(s);
        let x: Array2<f64> = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let y = (0..n).map(|i| x[[i, 0]].sin() * 2.0 + x[[i, d - 1]] + rng.random_range(-0.1..0.1)).collect();
        (x, y)
    }

    #[test]
    fn constant_target_everywhere() {
        let (x, _) = data(50, 3, 1);
        let cfg = ForestConfig { n_trees: 10, ..Default::default() };
        let f = fit_random_forest(x.view(), &[4.0; 50], &cfg).unwrap();
        assert!(f.predict(x.view()).unwrap().iter().all(|&p| p == 4.0));
    }

    #[test]
    fn same_seed_same_bytes() {
        let (x, y) = data(80, 4, 2);
        let cfg = ForestConfig { n_trees: 12, seed: 77, ..Default::default() };
        let a = serde_json::to_vec(&fit_random_forest(x.view(), &y, &cfg).unwrap()).unwrap();
        let b = serde_json::to_vec(&fit_random_forest(x.view(), &y, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = ForestConfig { seed: 78, ..cfg };
        let c = serde_json::to_vec(&fit_random_forest(x.view(), &y, &other).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_tree_without_bootstrap_is_fit_tree() {
        let (x, y) = data(60, 3, 3);
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            max_features: Some(3),
            max_depth: 6,
            ..Default::default()
        };
        let forest = fit_random_forest(x.view(), &y, &cfg).unwrap();
        let tree = fit_tree(x.view(), Targets::Raw(&y), &TreeParams::variance(6, 1), &mut seed::rng(0)).unwrap();
        assert_eq!(forest.trees[0], tree);
    }

    #[test]
    fn empty_input_predicts_nothing() {
        let (x, y) = data(30, 2, 4);
        let f = fit_random_forest(x.view(), &y, &ForestConfig { n_trees: 3, ..Default::default() }).unwrap();
        assert!(f.predict(Array2::zeros((0, 2)).view()).unwrap().is_empty());
        assert!(matches!(
            f.predict(Array2::zeros((1, 5)).view()),
            Err(TreeError::DimensionMismatch { expected: 2, found: 5 })
        ));
    }

    #[test]
    fn identical_single_leaf_trees() {
        let forest = Forest {
            trees: vec![TreeNode::Leaf { value: 1.5 }; 4],
            n_features: 2,
            bootstrap_seed: 0,
        };
        assert_eq!(forest.predict(Array2::zeros((3, 2)).view()).unwrap(), vec![1.5; 3]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn prediction_is_mean_of_trees(s in 0u64..1000, probe in prop::collection::vec(-1.5f64..1.5, 9)) {
            let (x, y) = data(40, 3, s);
            let f = fit_random_forest(x.view(), &y, &ForestConfig { n_trees: 7, seed: s, ..Default::default() }).unwrap();
            let q = Array2::from_shape_vec((3, 3), probe).unwrap();
            let pred = f.predict(q.view()).unwrap();
            for (i, row) in q.rows().into_iter().enumerate() {
                let row = row.to_vec();
                let mean = f.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>() / 7.0;
                prop_assert!((pred[i] - mean).abs() < 1e-12);
            }
        }
    }
}
