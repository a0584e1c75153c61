//! Exact t-SNE with a Student-t embedding kernel.

use rand_distr::{Distribution, Normal};

use super::LabeledMatrix;
use crate::error::{Error, Result};
use crate::seed::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsneParams {
    pub perplexity: f64,
    pub out_dims: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    /// KL is recorded every this many iterations (and at the end).
    pub trace_every: usize,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 80.0,
            out_dims: 2,
            iterations: 1000,
            learning_rate: 200.0,
            momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            trace_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    pub coords: Vec<Vec<f64>>,
    /// Realized perplexity of each row's conditional distribution.
    pub row_perplexity: Vec<f64>,
    /// `(iteration, KL(P || Q))`; the first entry is the initial layout.
    pub kl_trace: Vec<(usize, f64)>,
}

impl TsneResult {
    pub fn initial_kl(&self) -> f64 {
        self.kl_trace.first().map_or(f64::NAN, |t| t.1)
    }

    pub fn final_kl(&self) -> f64 {
        self.kl_trace.last().map_or(f64::NAN, |t| t.1)
    }
}

const PERPLEXITY_TOL: f64 = 1e-5;
const SEARCH_STEPS: usize = 200;

fn squared_distances(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Conditional row `p_{j|i}` for squared distances `d` (excluding `i`)
/// at precision `beta`. Returns the row and its perplexity `exp(H)`.
fn conditional_row(d: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = d.iter().map(|v| (-beta * (v - dmin)).exp()).collect();
    let sum: f64 = p.iter().sum();
    let mut h = 0.0;
    for v in &mut p {
        *v /= sum;
        if *v > 0.0 {
            h -= *v * v.ln();
        }
    }
    (p, h.exp())
}

/// Binary search on the Gaussian precision of each row. Rows whose
/// perplexity cannot reach the target (e.g. all distances equal) keep the
/// closest attainable value, which the returned perplexities expose.
pub fn conditional_probabilities(x: &[Vec<f64>], perplexity: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = x.len();
    let dist = squared_distances(x);
    let mut rows = Vec::with_capacity(n);
    let mut perps = Vec::with_capacity(n);
    for i in 0..n {
        let d: Vec<f64> = (0..n)
            .filter(|j| *j != i)
            .map(|j| dist[i * n + j])
            .collect();
        let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
        let mut beta = 1.0;
        let (mut p, mut perp) = conditional_row(&d, beta);
        for _ in 0..SEARCH_STEPS {
            if (perp - perplexity).abs() < PERPLEXITY_TOL {
                break;
            }
            // perplexity falls as beta grows
            if perp > perplexity {
                lo = beta;
                beta = if hi.is_finite() {
                    (beta + hi) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            (p, perp) = conditional_row(&d, beta);
        }
        let mut full = Vec::with_capacity(n);
        full.extend_from_slice(&p[..i]);
        full.push(0.0);
        full.extend_from_slice(&p[i..]);
        rows.push(full);
        perps.push(perp);
    }
    (rows, perps)
}

/// Symmetric joint `P` (row-major N×N) with `p_ij = (p_{j|i} + p_{i|j}) / 2N`.
pub fn joint_probabilities(x: &[Vec<f64>], perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let (cond, perps) = conditional_probabilities(x, perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i][j] + cond[j][i]) / (2.0 * n as f64);
        }
    }
    (p, perps)
}

/// Student-t affinities: returns the unnormalized kernel matrix and its sum.
fn student_t(y: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = y[i].iter().zip(&y[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            let v = 1.0 / (1.0 + d);
            num[i * n + j] = v;
            num[j * n + i] = v;
            z += 2.0 * v;
        }
    }
    (num, z)
}

pub fn kl_divergence(p: &[f64], y: &[Vec<f64>]) -> f64 {
    let (num, z) = student_t(y);
    p.iter()
        .zip(&num)
        .filter(|(pij, _)| **pij > 0.0)
        .map(|(pij, nij)| pij * (pij / (nij / z).max(1e-300)).ln())
        .sum()
}

/// Embeds the rows of `x`. Requires `perplexity < N / 3`.
pub fn tsne_rows(x: &[Vec<f64>], params: &TsneParams, seed: u64) -> Result<TsneResult> {
    let n = x.len();
    if params.out_dims == 0 {
        return Err(Error::usage("t-SNE output dimension must be positive"));
    }
    if !(params.perplexity > 0.0) || params.perplexity >= n as f64 / 3.0 {
        return Err(Error::usage(format!(
            "perplexity {} is infeasible for {n} points (needs 0 < perplexity < N/3)",
            params.perplexity
        )));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data("t-SNE input has non-finite values"));
    }
    let dims = params.out_dims;
    let (p, row_perplexity) = joint_probabilities(x, params.perplexity);

    let mut r = rng(seed);
    let init = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut y: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dims).map(|_| init.sample(&mut r)).collect())
        .collect();
    let mut update = vec![vec![0.0; dims]; n];
    let mut gains = vec![vec![1.0_f64; dims]; n];
    let mut kl_trace = vec![(0, kl_divergence(&p, &y))];

    for it in 0..params.iterations {
        let ex = if it < params.exaggeration_iters {
            params.exaggeration
        } else {
            1.0
        };
        let mom = if it < params.momentum_switch {
            params.momentum
        } else {
            params.final_momentum
        };
        let (num, z) = student_t(&y);
        for i in 0..n {
            let mut grad = vec![0.0; dims];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let nij = num[i * n + j];
                let mult = (ex * p[i * n + j] - nij / z) * nij;
                for (g, (a, b)) in grad.iter_mut().zip(y[i].iter().zip(&y[j])) {
                    *g += 4.0 * mult * (a - b);
                }
            }
            for d in 0..dims {
                let same_sign = (grad[d] > 0.0) == (update[i][d] > 0.0);
                gains[i][d] = if same_sign {
                    (gains[i][d] * 0.8).max(0.01)
                } else {
                    gains[i][d] + 0.2
                };
                update[i][d] = mom * update[i][d] - params.learning_rate * gains[i][d] * grad[d];
            }
        }
        for (yi, ui) in y.iter_mut().zip(&update) {
            for (a, u) in yi.iter_mut().zip(ui) {
                *a += u;
            }
        }
        for d in 0..dims {
            let m = y.iter().map(|v| v[d]).sum::<f64>() / n as f64;
            for v in &mut y {
                v[d] -= m;
            }
        }
        let done = it + 1 == params.iterations;
        if done || (params.trace_every > 0 && (it + 1) % params.trace_every == 0) {
            let kl = kl_divergence(&p, &y);
            if !kl.is_finite() {
                return Err(Error::numeric(format!(
                    "t-SNE diverged at iteration {}",
                    it + 1
                )));
            }
            kl_trace.push((it + 1, kl));
        }
    }
    Ok(TsneResult {
        coords: y,
        row_perplexity,
        kl_trace,
    })
}

pub fn tsne(m: &LabeledMatrix, params: &TsneParams, seed: u64) -> Result<TsneResult> {
    tsne_rows(&m.rows, params, seed)
}
