//! Least-squares gradient boosting with depth-limited regression trees.
//!
//! Greedy variance-reduction splits, no stochastic subsampling; deterministic
//! given the data.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig { n_trees: 100, max_depth: 3, learning_rate: 0.1, min_leaf: 5 }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GbtModel {
    pub base: f64,
    pub learning_rate: f64,
    trees: Vec<RegressionTree>,
}

impl GbtModel {
    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        let mut out = Array1::from_elem(x.nrows(), self.base);
        let mut row = vec![0.0; x.ncols()];
        for i in 0..x.nrows() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = x[[i, j]];
            }
            for tree in &self.trees {
                out[i] += self.learning_rate * tree.predict_row(&row);
            }
        }
        out
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

struct TreeBuilder<'a> {
    x: &'a Array2<f64>,
    target: &'a [f64],
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    /// Best split of `idx` on any feature by SSE reduction; ties keep the
    /// first (lowest feature index, then lowest threshold) candidate.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64, Vec<usize>, Vec<usize>)> {
        let n = idx.len();
        if n < 2 * self.min_leaf {
            return None;
        }
        let total_sum: f64 = idx.iter().map(|&i| self.target[i]).sum();
        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
        let mut order: Vec<usize> = idx.to_vec();
        for feature in 0..self.x.ncols() {
            order.sort_by(|&a, &b| {
                self.x[[a, feature]]
                    .partial_cmp(&self.x[[b, feature]])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut left_sum = 0.0;
            for (pos, &i) in order.iter().enumerate().take(n - 1) {
                left_sum += self.target[i];
                let n_left = pos + 1;
                let n_right = n - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let v_here = self.x[[i, feature]];
                let v_next = self.x[[order[pos + 1], feature]];
                if v_here == v_next {
                    continue;
                }
                // variance-reduction gain, constant terms dropped
                let right_sum = total_sum - left_sum;
                let gain = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / n_right as f64;
                if best.map(|(g, _, _)| gain > g + 1e-12).unwrap_or(true) {
                    best = Some((gain, feature, 0.5 * (v_here + v_next)));
                }
            }
        }
        let (_, feature, threshold) = best?;
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for &i in idx {
            if self.x[[i, feature]] <= threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        Some((feature, threshold, left, right))
    }

    fn build(&mut self, idx: &[usize], depth: usize, max_depth: usize) -> usize {
        let mean = idx.iter().map(|&i| self.target[i]).sum::<f64>() / idx.len() as f64;
        if depth >= max_depth {
            self.nodes.push(Node::Leaf { value: mean });
            return self.nodes.len() - 1;
        }
        match self.best_split(idx) {
            None => {
                self.nodes.push(Node::Leaf { value: mean });
                self.nodes.len() - 1
            }
            Some((feature, threshold, left_idx, right_idx)) => {
                let slot = self.nodes.len();
                self.nodes.push(Node::Leaf { value: mean }); // placeholder
                let left = self.build(&left_idx, depth + 1, max_depth);
                let right = self.build(&right_idx, depth + 1, max_depth);
                self.nodes[slot] = Node::Split { feature, threshold, left, right };
                slot
            }
        }
    }
}

/// Fits `n_trees` boosting rounds on the residuals; prediction is
/// `mean(y) + lr * sum(trees)`.
pub fn fit_gbt(x: &Array2<f64>, y: &Array1<f64>, config: &GbtConfig) -> Result<GbtModel> {
    let n = x.nrows();
    if n < 2 || y.len() != n {
        return Err(Error::data("fit_gbt needs n >= 2 with matching x and y"));
    }
    if config.n_trees == 0 {
        return Err(Error::config("gbt needs at least one tree"));
    }
    let base = y.mean().unwrap();
    let mut residual: Vec<f64> = y.iter().map(|&v| v - base).collect();
    let mut trees = Vec::with_capacity(config.n_trees);
    let all_idx: Vec<usize> = (0..n).collect();
    let mut row = vec![0.0; x.ncols()];
    for _ in 0..config.n_trees {
        let mut builder = TreeBuilder {
            x,
            target: &residual,
            min_leaf: config.min_leaf,
            nodes: Vec::new(),
        };
        builder.build(&all_idx, 0, config.max_depth);
        let tree = RegressionTree { nodes: builder.nodes };
        for i in 0..n {
            for (j, v) in row.iter_mut().enumerate() {
                *v = x[[i, j]];
            }
            residual[i] -= config.learning_rate * tree.predict_row(&row);
        }
        trees.push(tree);
    }
    Ok(GbtModel { base, learning_rate: config.learning_rate, trees })
}
