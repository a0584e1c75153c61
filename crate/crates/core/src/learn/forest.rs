//! Random forest of Gini CART trees, used mainly for feature importance.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::LabeledMatrix;
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Features tried per split; zero means `floor(sqrt(d))`.
    pub max_features: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 200,
            max_depth: 8,
            max_features: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_classes: usize,
    pub n_features: usize,
    /// Mean normalized impurity decrease per feature; sums to 1 unless no
    /// tree ever split.
    pub importances: Vec<f64>,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    1.0 - counts.iter().map(|c| (*c as f64 / nf).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    (0..counts.len())
        .max_by(|a, b| counts[*a].cmp(&counts[*b]).then(b.cmp(a)))
        .unwrap_or(0)
}

struct Builder<'a, R: Rng> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    max_features: usize,
    n_total: f64,
    importance: Vec<f64>,
    nodes: Vec<Node>,
    rng: R,
}

impl<R: Rng> Builder<'_, R> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for i in idx.iter() {
            counts[self.y[*i]] += 1;
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: majority(&counts),
        });
        let n = idx.len();
        let parent = gini(&counts, n);
        if depth >= self.max_depth || n < 2 || parent == 0.0 {
            return id;
        }
        let d = self.x[0].len();
        let feats = sample(&mut self.rng, d, self.max_features.min(d));
        // (weighted child impurity, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        for f in feats.iter() {
            idx.sort_by(|a, b| self.x[*a][f].total_cmp(&self.x[*b][f]).then(a.cmp(b)));
            let mut left = vec![0usize; self.n_classes];
            for k in 0..n - 1 {
                left[self.y[idx[k]]] += 1;
                let (v, next) = (self.x[idx[k]][f], self.x[idx[k + 1]][f]);
                if v == next {
                    continue;
                }
                let nl = k + 1;
                let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let imp = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl))
                    / n as f64;
                if best.is_none_or(|b| imp < b.0) {
                    best = Some((imp, f, v + (next - v) / 2.0));
                }
            }
        }
        let Some((child_imp, feature, threshold)) = best else {
            return id;
        };
        let decrease = n as f64 / self.n_total * (parent - child_imp);
        self.importance[feature] += decrease;
        let mut left_idx: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|i| self.x[*i][feature] <= threshold)
            .collect();
        let mut right_idx: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|i| self.x[*i][feature] > threshold)
            .collect();
        let left = self.build(&mut left_idx, depth + 1);
        let right = self.build(&mut right_idx, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Grows one tree on a bootstrap sample; returns it with its per-feature
/// impurity decrease normalized to sum 1 (all zeros if it never split).
fn grow_tree(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    p: &ForestParams,
    max_features: usize,
    seed: u64,
) -> (Tree, Vec<f64>) {
    let n = x.len();
    let mut r = rng(seed);
    let mut idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
    let mut b = Builder {
        x,
        y,
        n_classes,
        max_depth: p.max_depth,
        max_features,
        n_total: n as f64,
        importance: vec![0.0; x[0].len()],
        nodes: Vec::new(),
        rng: r,
    };
    b.build(&mut idx, 0);
    let total: f64 = b.importance.iter().sum();
    if total > 0.0 {
        b.importance.iter_mut().for_each(|v| *v /= total);
    }
    (Tree { nodes: b.nodes }, b.importance)
}

pub fn forest_fit_rows(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    p: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::usage(
            "forest needs non-empty, aligned rows and labels",
        ));
    }
    if p.n_estimators == 0 {
        return Err(Error::usage("n_estimators must be positive"));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::usage("forest needs at least one feature"));
    }
    let distinct = (0..n_classes).filter(|c| y.contains(c)).count();
    if distinct < 2 {
        return Err(Error::data("forest needs at least 2 classes"));
    }
    let mf = if p.max_features == 0 {
        ((d as f64).sqrt().floor() as usize).max(1)
    } else {
        p.max_features
    };
    let grown: Vec<(Tree, Vec<f64>)> = (0..p.n_estimators)
        .into_par_iter()
        .map(|t| grow_tree(x, y, n_classes, p, mf, derive_seed(seed, t as u64)))
        .collect();
    let mut importances = vec![0.0; d];
    for (_, imp) in &grown {
        for (a, b) in importances.iter_mut().zip(imp) {
            *a += b / p.n_estimators as f64;
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ForestModel {
        trees: grown.into_iter().map(|g| g.0).collect(),
        n_classes,
        n_features: d,
        importances,
    })
}

pub fn forest_fit(train: &LabeledMatrix, p: &ForestParams, seed: u64) -> Result<ForestModel> {
    forest_fit_rows(&train.rows, &train.labels, train.n_classes(), p, seed)
}

pub fn forest_importance(
    train: &LabeledMatrix,
    n_estimators: usize,
    max_depth: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let p = ForestParams {
        n_estimators,
        max_depth,
        max_features: 0,
    };
    Ok(forest_fit(train, &p, seed)?.importances)
}

impl ForestModel {
    /// Majority vote over trees, ties to the lower class id.
    pub fn predict_row(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict_row(x)] += 1;
        }
        majority(&votes)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.par_iter().map(|r| self.predict_row(r)).collect()
    }
}
