//! Brute-force k-nearest-neighbor classifier.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::LabeledMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub n_classes: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl KnnModel {
    pub fn fit(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        n_classes: usize,
        k: usize,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::usage("k must be at least 1"));
        }
        if k > rows.len() {
            return Err(Error::usage(format!(
                "k = {k} exceeds {} training rows",
                rows.len()
            )));
        }
        if labels.len() != rows.len() {
            return Err(Error::data("rows and labels differ in length"));
        }
        Ok(KnnModel {
            k,
            n_classes,
            rows,
            labels,
        })
    }

    /// The `k` nearest training rows as `(index, distance)`, nearest first;
    /// equal distances keep the lower index first.
    pub fn neighbors(&self, q: &[f64]) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, euclidean(r, q)))
            .collect();
        let k = self.k;
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, |a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            d.truncate(k);
        }
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        d
    }

    /// Majority vote; ties go to the smallest mean distance, then the lowest class id.
    pub fn predict_row(&self, q: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        let mut dist = vec![0.0; self.n_classes];
        for (i, d) in self.neighbors(q) {
            votes[self.labels[i]] += 1;
            dist[self.labels[i]] += d;
        }
        (0..self.n_classes)
            .filter(|c| votes[*c] > 0)
            .min_by(|a, b| {
                votes[*b]
                    .cmp(&votes[*a])
                    .then((dist[*a] / votes[*a] as f64).total_cmp(&(dist[*b] / votes[*b] as f64)))
                    .then(a.cmp(b))
            })
            .unwrap_or(0)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.par_iter().map(|r| self.predict_row(r)).collect()
    }
}

pub fn knn_fit(train: &LabeledMatrix, k: usize) -> Result<KnnModel> {
    KnnModel::fit(
        train.rows.clone(),
        train.labels.clone(),
        train.n_classes(),
        k,
    )
}

pub fn knn_predict(model: &KnnModel, rows: &[Vec<f64>]) -> Vec<usize> {
    model.predict(rows)
}
