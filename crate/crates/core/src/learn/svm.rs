//! Soft-margin RBF support vector machine trained by SMO.
//!
//! Binary problems use maximal-violating-pair selection with second-order
//! gain for the second index. Multiclass prediction is one-vs-one voting.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::LabeledMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    /// Stop once the maximal KKT violation `m - M` drops below this.
    pub tol: f64,
    /// Iteration cap; zero means `max(10_000_000, 100 * n)`.
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 10.0,
            gamma: 1.0,
            tol: 1e-3,
            max_iter: 0,
        }
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

/// Full dual solution of one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    /// Decision is `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    /// Dual objective `sum(alpha) - alpha' Q alpha / 2` after each update.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub final_violation: f64,
}

/// Solves `max sum(a) - a'Qa/2` subject to `0 <= a <= C` and `y'a = 0`, with
/// `Q_ij = y_i y_j K(x_i, x_j)` and `y` in {-1, +1}.
pub fn solve_binary(x: &[Vec<f64>], y: &[f64], params: &SvmParams) -> Result<BinarySolution> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::usage(
            "binary SVM needs at least 2 rows with matching labels",
        ));
    }
    if !(params.c > 0.0) || !(params.gamma > 0.0) {
        return Err(Error::usage("C and gamma must be positive"));
    }
    let c = params.c;
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let v = rbf(&x[i], &x[j], params.gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n]; // Q alpha - e
    let max_iter = if params.max_iter == 0 {
        (100 * n).max(10_000_000)
    } else {
        params.max_iter
    };
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    let mut trace = Vec::new();
    let mut violation = f64::INFINITY;
    let mut iter = 0;
    while iter < max_iter {
        // i: maximal -y G over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i_sel != usize::MAX && v < gmax {
                let b = gmax - v;
                let a = (k[i_sel * n + i_sel] + k[t * n + t] - 2.0 * k[i_sel * n + t]).max(1e-12);
                let gain = -b * b / a;
                if gain < best {
                    best = gain;
                    j_sel = t;
                }
            }
        }
        violation = gmax - gmin;
        if i_sel == usize::MAX || j_sel == usize::MAX || violation < params.tol {
            break;
        }
        let (i, j) = (i_sel, j_sel);
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let quad = (k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j]).max(1e-12);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
        // -(1/2) a'(G + e) + e'a  ==  sum a - a'Qa/2
        trace.push(
            alpha
                .iter()
                .zip(&grad)
                .map(|(a, g)| -0.5 * a * (g - 1.0))
                .sum(),
        );
        iter += 1;
    }
    if violation >= params.tol && iter >= max_iter {
        return Err(Error::numeric(format!(
            "SMO did not converge in {max_iter} iterations (KKT violation {violation:.3e}, C = {}, gamma = {})",
            params.c, params.gamma
        )));
    }

    let mut free_sum = 0.0;
    let mut free = 0usize;
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += yg;
            free += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    Ok(BinarySolution {
        alpha,
        rho,
        objective_trace: trace,
        iterations: iter,
        final_violation: violation.max(0.0),
    })
}

/// One-vs-one machine separating `pos` (+1) from `neg` (-1).
#[derive(Debug, Clone, PartialEq)]
pub struct PairMachine {
    pub pos: usize,
    pub neg: usize,
    pub support: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl PairMachine {
    pub fn decision(&self, x: &[f64], gamma: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * rbf(s, x, gamma))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub c: f64,
    pub gamma: f64,
    pub n_classes: usize,
    pub machines: Vec<PairMachine>,
}

pub fn svm_fit_rows(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    params: &SvmParams,
) -> Result<SvmModel> {
    let present: Vec<usize> = (0..n_classes).filter(|c| labels.contains(c)).collect();
    if present.len() < 2 {
        return Err(Error::data(
            "SVM needs at least 2 classes in the training data",
        ));
    }
    let pairs: Vec<(usize, usize)> = present
        .iter()
        .enumerate()
        .flat_map(|(a, p)| present[a + 1..].iter().map(move |q| (*p, *q)))
        .collect();
    let machines = pairs
        .par_iter()
        .map(|&(pos, neg)| {
            let idx: Vec<usize> = (0..rows.len())
                .filter(|i| labels[*i] == pos || labels[*i] == neg)
                .collect();
            let x: Vec<Vec<f64>> = idx.iter().map(|i| rows[*i].clone()).collect();
            let y: Vec<f64> = idx
                .iter()
                .map(|i| if labels[*i] == pos { 1.0 } else { -1.0 })
                .collect();
            let sol = solve_binary(&x, &y, params)?;
            let mut support = Vec::new();
            let mut coef = Vec::new();
            for (t, a) in sol.alpha.iter().enumerate() {
                if *a > 0.0 {
                    support.push(x[t].clone());
                    coef.push(a * y[t]);
                }
            }
            Ok(PairMachine {
                pos,
                neg,
                support,
                coef,
                bias: -sol.rho,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SvmModel {
        c: params.c,
        gamma: params.gamma,
        n_classes,
        machines,
    })
}

pub fn svm_fit(train: &LabeledMatrix, params: &SvmParams) -> Result<SvmModel> {
    svm_fit_rows(&train.rows, &train.labels, train.n_classes(), params)
}

impl SvmModel {
    /// Most votes wins; ties go to the larger summed signed decision value,
    /// then the lower class id.
    pub fn predict_row(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        let mut margin = vec![0.0; self.n_classes];
        for m in &self.machines {
            let d = m.decision(x, self.gamma);
            if d > 0.0 {
                votes[m.pos] += 1;
            } else {
                votes[m.neg] += 1;
            }
            margin[m.pos] += d;
            margin[m.neg] -= d;
        }
        (0..self.n_classes)
            .min_by(|a, b| {
                votes[*b]
                    .cmp(&votes[*a])
                    .then(margin[*b].total_cmp(&margin[*a]))
                    .then(a.cmp(b))
            })
            .unwrap_or(0)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.par_iter().map(|r| self.predict_row(r)).collect()
    }
}

pub fn svm_predict(model: &SvmModel, rows: &[Vec<f64>]) -> Vec<usize> {
    model.predict(rows)
}
