//! Regression trees grown on presorted feature orders.
//!
//! A node owns the same contiguous segment `[start, end)` in every
//! feature's sorted buffer; splitting stably partitions each segment so the
//! children again own contiguous, still-sorted segments.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TreeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf { value: f64 },
}

impl TreeNode {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Largest feature index referenced by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature, left, right, ..
            } => Some(
                [Some(*feature), left.max_feature(), right.max_feature()]
                    .into_iter()
                    .flatten()
                    .max()
                    .unwrap_or(*feature),
            ),
        }
    }
}

/// What the leaves fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitObjective {
    /// Leaves are target means; splits maximize the reduction in squared error.
    Variance,
    /// Second-order boosting: leaves are `-G / (H + lambda)`, splits maximize
    /// `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ`.
    Gradient { lambda: f64, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
    pub objective: SplitObjective,
}

impl TreeParams {
    pub fn variance(max_depth: usize, min_samples_leaf: usize) -> Self {
        TreeParams {
            max_depth,
            min_samples_leaf,
            max_features: None,
            objective: SplitObjective::Variance,
        }
    }
}

/// Per-sample statistics the tree is fit to.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Raw(&'a [f64]),
    Gradient { grad: &'a [f64], hess: &'a [f64] },
}

/// Sample rows with one ascending order per feature. Reusable across the
/// trees of a boosted ensemble, which all see the same rows.
#[derive(Debug, Clone)]
pub struct Presorted {
    rows: Vec<usize>,
    order: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
}

impl Presorted {
    /// `rows` may repeat indices (bootstrap samples).
    pub fn new(x: ArrayView2<f64>, rows: &[usize]) -> Self {
        let d = x.ncols();
        let mut order = Vec::with_capacity(d);
        let mut values = Vec::with_capacity(d);
        for j in 0..d {
            let col: Vec<f64> = rows.iter().map(|&r| x[[r, j]]).collect();
            let mut idx: Vec<u32> = (0..rows.len() as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            order.push(idx);
            values.push(col);
        }
        Presorted {
            rows: rows.to_vec(),
            order,
            values,
        }
    }

    pub fn all_rows(x: ArrayView2<f64>) -> Self {
        let rows: Vec<usize> = (0..x.nrows()).collect();
        Self::new(x, &rows)
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.order.len()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }
}

/// Fits one tree to all rows of `x`.
pub fn fit_tree<R: Rng>(
    x: ArrayView2<f64>,
    targets: Targets,
    params: &TreeParams,
    rng: &mut R,
) -> Result<TreeNode, TreeError> {
    fit_tree_presorted(&Presorted::all_rows(x), targets, params, rng)
}

/// Fits one tree on presorted samples. `targets` is indexed by the original
/// row index.
pub fn fit_tree_presorted<R: Rng>(
    data: &Presorted,
    targets: Targets,
    params: &TreeParams,
    rng: &mut R,
) -> Result<TreeNode, TreeError> {
    let n = data.n_samples();
    if n == 0 {
        return Err(TreeError::EmptyTrainingSet);
    }
    if params.min_samples_leaf == 0 {
        return Err(TreeError::InvalidParameter("min_samples_leaf must be at least 1".into()));
    }
    if n < 2 * params.min_samples_leaf {
        return Err(TreeError::TooFewSamples {
            n,
            min_samples_leaf: params.min_samples_leaf,
        });
    }
    let (grad, hess): (Vec<f64>, Vec<f64>) = match targets {
        Targets::Raw(y) => (data.rows.iter().map(|&r| y[r]).collect(), vec![1.0; n]),
        Targets::Gradient { grad, hess } => (
            data.rows.iter().map(|&r| grad[r]).collect(),
            data.rows.iter().map(|&r| hess[r]).collect(),
        ),
    };
    if grad.iter().chain(&hess).any(|v| !v.is_finite()) {
        return Err(TreeError::NonFinite);
    }
    let mut builder = Builder {
        data,
        order: data.order.clone(),
        grad,
        hess,
        params: *params,
        go_left: vec![false; n],
        scratch: Vec::with_capacity(n),
    };
    Ok(builder.grow(0, n, 0, rng))
}

struct Builder<'a> {
    data: &'a Presorted,
    order: Vec<Vec<u32>>,
    grad: Vec<f64>,
    hess: Vec<f64>,
    params: TreeParams,
    go_left: Vec<bool>,
    scratch: Vec<u32>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        match self.params.objective {
            SplitObjective::Variance => g / h,
            SplitObjective::Gradient { lambda, .. } => -g / (h + lambda),
        }
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        match self.params.objective {
            SplitObjective::Variance => g * g / h,
            SplitObjective::Gradient { lambda, .. } => g * g / (h + lambda),
        }
    }

    fn gain(&self, gl: f64, hl: f64, g: f64, h: f64) -> f64 {
        let raw = self.score(gl, hl) + self.score(g - gl, h - hl) - self.score(g, h);
        match self.params.objective {
            SplitObjective::Variance => raw,
            SplitObjective::Gradient { gamma, .. } => 0.5 * raw - gamma,
        }
    }

    fn grow<R: Rng>(&mut self, start: usize, end: usize, depth: usize, rng: &mut R) -> TreeNode {
        let seg = &self.order[0][start..end];
        let (g, h) = seg.iter().fold((0.0, 0.0), |(g, h), &p| {
            (g + self.grad[p as usize], h + self.hess[p as usize])
        });
        let leaf = TreeNode::Leaf {
            value: self.leaf_value(g, h),
        };
        let n = end - start;
        if depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf {
            return leaf;
        }
        if matches!(self.params.objective, SplitObjective::Variance) {
            let first = self.grad[seg[0] as usize];
            if seg.iter().all(|&p| self.grad[p as usize] == first) {
                return leaf;
            }
        }
        let Some(best) = self.best_split(start, end, g, h, rng) else {
            return leaf;
        };

        let values = &self.data.values[best.feature];
        let mut n_left = 0;
        for &p in &self.order[best.feature][start..end] {
            let left = values[p as usize] <= best.threshold;
            self.go_left[p as usize] = left;
            n_left += usize::from(left);
        }
        for j in 0..self.order.len() {
            let seg = &mut self.order[j][start..end];
            self.scratch.clear();
            let mut write = 0;
            for i in 0..seg.len() {
                let p = seg[i];
                if self.go_left[p as usize] {
                    seg[write] = p;
                    write += 1;
                } else {
                    self.scratch.push(p);
                }
            }
            seg[write..].copy_from_slice(&self.scratch);
        }
        let mid = start + n_left;
        let left = self.grow(start, mid, depth + 1, rng);
        let right = self.grow(mid, end, depth + 1, rng);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Scans features in ascending index order and thresholds in ascending
    /// order, keeping the first strictly best candidate.
    fn best_split<R: Rng>(&self, start: usize, end: usize, g: f64, h: f64, rng: &mut R) -> Option<Candidate> {
        let d = self.order.len();
        let features: Vec<usize> = match self.params.max_features {
            Some(m) if m < d => {
                let mut f = sample(rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let min_leaf = self.params.min_samples_leaf;
        let n = end - start;
        // Gains within rounding noise of each other count as ties.
        let tol = 1e-10 * (self.score(g, h).abs() + 1.0);
        let mut best: Option<Candidate> = None;
        for j in features {
            let seg = &self.order[j][start..end];
            let values = &self.data.values[j];
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..n - 1 {
                let p = seg[i] as usize;
                gl += self.grad[p];
                hl += self.hess[p];
                let (v, v_next) = (values[p], values[seg[i + 1] as usize]);
                if v == v_next || i + 1 < min_leaf || n - i - 1 < min_leaf {
                    continue;
                }
                let gain = self.gain(gl, hl, g, h);
                if gain > tol && best.is_none_or(|b| gain > b.gain + tol) {
                    let mut threshold = 0.5 * (v + v_next);
                    if threshold >= v_next {
                        threshold = v;
                    }
                    best = Some(Candidate {
                        feature: j,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::{array, Array2};
    use rand::Rng;

    #[test]
    fn stump_on_two_points() {
        let x = array![[0.0], [1.0]];
        let tree = fit_tree(x.view(), Targets::Raw(&[0.0, 1.0]), &TreeParams::variance(1, 1), &mut seed::rng(0)).unwrap();
        assert_eq!(
            tree,
            TreeNode::Split {
                feature: 0,
                threshold: 0.5,
                left: Box::new(TreeNode::Leaf { value: 0.0 }),
                right: Box::new(TreeNode::Leaf { value: 1.0 }),
            }
        );
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let mut rng = seed::rng(3);
        let x = Array2::from_shape_fn((40, 3), |_| rng.random::<f64>());
        let y = vec![2.5; 40];
        let tree = fit_tree(x.view(), Targets::Raw(&y), &TreeParams::variance(10, 1), &mut rng).unwrap();
        assert_eq!(tree, TreeNode::Leaf { value: 2.5 });
    }

    #[test]
    fn identical_rows_are_a_leaf() {
        let x = Array2::from_elem((6, 2), 1.0);
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let tree = fit_tree(x.view(), Targets::Raw(&y), &TreeParams::variance(5, 1), &mut seed::rng(0)).unwrap();
        assert_eq!(tree, TreeNode::Leaf { value: 3.5 });
    }

    #[test]
    fn gradient_leaf_is_mean_residual() {
        let x = array![[0.0], [1.0], [2.0]];
        let y = [1.0, 2.0, 6.0];
        let pred = [0.5, 0.5, 0.5];
        let grad: Vec<f64> = pred.iter().zip(&y).map(|(p, t)| p - t).collect();
        let params = TreeParams {
            max_depth: 0,
            min_samples_leaf: 1,
            max_features: None,
            objective: SplitObjective::Gradient { lambda: 0.0, gamma: 0.0 },
        };
        let tree = fit_tree(x.view(), Targets::Gradient { grad: &grad, hess: &[1.0; 3] }, &params, &mut seed::rng(0)).unwrap();
        let TreeNode::Leaf { value } = tree else { panic!("expected a leaf") };
        assert!((value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let mut rng = seed::rng(9);
        let x = Array2::from_shape_fn((60, 2), |_| rng.random::<f64>());
        let y: Vec<f64> = (0..60).map(|i| x[[i, 0]] * 3.0 + x[[i, 1]]).collect();
        let tree = fit_tree(x.view(), Targets::Raw(&y), &TreeParams::variance(20, 7), &mut rng).unwrap();
        fn check(node: &TreeNode, x: &Array2<f64>, rows: Vec<usize>) {
            match node {
                TreeNode::Leaf { .. } => assert!(rows.len() >= 7),
                TreeNode::Split { feature, threshold, left, right } => {
                    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[[i, *feature]] <= *threshold);
                    check(left, x, l);
                    check(right, x, r);
                }
            }
        }
        check(&tree, &x, (0..60).collect());
    }

    #[test]
    fn json_dump_round_trips() {
        let mut rng = seed::rng(5);
        let x = Array2::from_shape_fn((50, 3), |_| rng.random::<f64>());
        let y: Vec<f64> = (0..50).map(|i| (x[[i, 0]] * 7.0).sin() + x[[i, 2]]).collect();
        let tree = fit_tree(x.view(), Targets::Raw(&y), &TreeParams::variance(4, 1), &mut rng).unwrap();
        let json = serde_json::to_string(&tree).unwrap();
        assert!(json.contains("\"feature\"") && json.contains("\"threshold\"") && json.contains("\"value\""));
        let back: TreeNode = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tree);
    }
}
