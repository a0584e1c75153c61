//! Fully connected ReLU network trained with Adam on mini-batches.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::features::LabeledMatrix;
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlpTask {
    /// Softmax output with cross-entropy loss.
    Classifier { n_classes: usize },
    /// Single linear output with loss `mean((o - y)^2) / 2`.
    Regressor,
}

#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Labels(&'a [usize]),
    Values(&'a [f64]),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Labels(l) => l.len(),
            Targets::Values(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    /// Weight of the squared-L2 penalty on weights (not biases).
    pub l2_alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![50, 100, 50],
            l2_alpha: 1e-4,
            learning_rate: 1e-3,
            epochs: 300,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// Input width, hidden widths, output width.
    pub sizes: Vec<usize>,
    /// Per layer: weights (row-major, `out x in`) then biases.
    pub params: Vec<f64>,
    pub task: MlpTask,
    pub l2_alpha: f64,
    /// Mean mini-batch loss per epoch.
    pub loss_curve: Vec<f64>,
}

fn layer_offsets(sizes: &[usize]) -> Vec<(usize, usize)> {
    let mut off = 0;
    sizes
        .windows(2)
        .map(|w| {
            let wo = off;
            let bo = off + w[0] * w[1];
            off = bo + w[1];
            (wo, bo)
        })
        .collect()
}

fn n_params(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Uniform `+-1/sqrt(fan_in)` initialization.
    pub fn init(
        n_inputs: usize,
        hidden: &[usize],
        task: MlpTask,
        l2_alpha: f64,
        seed: u64,
    ) -> Result<Self> {
        let n_out = match task {
            MlpTask::Classifier { n_classes } if n_classes >= 2 => n_classes,
            MlpTask::Classifier { .. } => {
                return Err(Error::data("classifier needs at least 2 classes"))
            }
            MlpTask::Regressor => 1,
        };
        if n_inputs == 0 || hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::usage(
                "MLP needs inputs and non-empty hidden layers of positive width",
            ));
        }
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(n_out);
        let mut params = vec![0.0; n_params(&sizes)];
        let mut r = rng(seed);
        for (w, (wo, _)) in sizes.windows(2).zip(layer_offsets(&sizes)) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut params[wo..wo + w[0] * w[1] + w[1]] {
                *p = r.random_range(-bound..bound);
            }
        }
        Ok(MlpModel {
            sizes,
            params,
            task,
            l2_alpha,
            loss_curve: Vec::new(),
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    fn workspace(&self) -> Workspace {
        Workspace {
            acts: self.sizes.iter().map(|s| vec![0.0; *s]).collect(),
            deltas: self.sizes.iter().map(|s| vec![0.0; *s]).collect(),
        }
    }

    /// Fills `ws.acts`; the last entry holds softmax probabilities or the
    /// regression output.
    fn forward(&self, x: &[f64], ws: &mut Workspace) {
        ws.acts[0].copy_from_slice(x);
        let offs = layer_offsets(&self.sizes);
        let last = offs.len() - 1;
        for (l, (wo, bo)) in offs.iter().enumerate() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (prev, next) = ws.acts.split_at_mut(l + 1);
            let a = &prev[l];
            let z = &mut next[0];
            for o in 0..n_out {
                let row = &self.params[wo + o * n_in..wo + (o + 1) * n_in];
                let s: f64 = row.iter().zip(a.iter()).map(|(w, v)| w * v).sum();
                let v = s + self.params[bo + o];
                z[o] = if l < last { v.max(0.0) } else { v };
            }
        }
        if let MlpTask::Classifier { .. } = self.task {
            let out = ws.acts.last_mut().expect("output layer");
            let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in out.iter_mut() {
                *v = (*v - m).exp();
                sum += *v;
            }
            for v in out.iter_mut() {
                *v /= sum;
            }
        }
    }

    /// Adds the gradient of the data loss over `idx` (averaged) into `grad`
    /// and returns that loss. No penalty term.
    fn accumulate(
        &self,
        x: &[Vec<f64>],
        t: Targets,
        idx: &[usize],
        grad: &mut [f64],
        ws: &mut Workspace,
    ) -> f64 {
        let offs = layer_offsets(&self.sizes);
        let inv = 1.0 / idx.len() as f64;
        let mut loss = 0.0;
        let nl = offs.len();
        for &s in idx {
            self.forward(&x[s], ws);
            let out = &ws.acts[nl];
            let d = &mut ws.deltas[nl];
            match t {
                Targets::Labels(l) => {
                    loss -= out[l[s]].max(1e-300).ln();
                    for (k, v) in out.iter().enumerate() {
                        d[k] = (v - f64::from(u8::from(k == l[s]))) * inv;
                    }
                }
                Targets::Values(v) => {
                    let e = out[0] - v[s];
                    loss += 0.5 * e * e;
                    d[0] = e * inv;
                }
            }
            for l in (0..nl).rev() {
                let (wo, bo) = offs[l];
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let a = &ws.acts[l];
                let (dprev, dnext) = ws.deltas.split_at_mut(l + 1);
                let dl = &dnext[0];
                for o in 0..n_out {
                    let g = dl[o];
                    if g == 0.0 {
                        continue;
                    }
                    let row = &mut grad[wo + o * n_in..wo + (o + 1) * n_in];
                    for (gw, av) in row.iter_mut().zip(a.iter()) {
                        *gw += g * av;
                    }
                    grad[bo + o] += g;
                }
                if l > 0 {
                    let dp = &mut dprev[l];
                    for i in 0..n_in {
                        dp[i] = 0.0;
                    }
                    for o in 0..n_out {
                        let g = dl[o];
                        if g == 0.0 {
                            continue;
                        }
                        let row = &self.params[wo + o * n_in..wo + (o + 1) * n_in];
                        for (di, w) in dp.iter_mut().zip(row) {
                            *di += g * w;
                        }
                    }
                    // ReLU derivative from the post-activation
                    for (di, av) in dp.iter_mut().zip(a.iter()) {
                        if *av <= 0.0 {
                            *di = 0.0;
                        }
                    }
                }
            }
        }
        loss * inv
    }

    fn add_penalty(&self, grad: &mut [f64]) -> f64 {
        let mut pen = 0.0;
        if self.l2_alpha == 0.0 {
            return 0.0;
        }
        for (wo, bo) in layer_offsets(&self.sizes) {
            for p in wo..bo {
                pen += self.params[p] * self.params[p];
                grad[p] += 2.0 * self.l2_alpha * self.params[p];
            }
        }
        self.l2_alpha * pen
    }

    /// Mean loss over all rows plus `l2_alpha * ||W||^2`, and its gradient
    /// with respect to [`MlpModel::params`].
    pub fn loss_and_gradient(&self, x: &[Vec<f64>], t: Targets) -> Result<(f64, Vec<f64>)> {
        self.check_inputs(x, t)?;
        let mut grad = vec![0.0; self.params.len()];
        let mut ws = self.workspace();
        let idx: Vec<usize> = (0..x.len()).collect();
        let loss = self.accumulate(x, t, &idx, &mut grad, &mut ws);
        let pen = self.add_penalty(&mut grad);
        Ok((loss + pen, grad))
    }

    fn check_inputs(&self, x: &[Vec<f64>], t: Targets) -> Result<()> {
        if x.is_empty() || x.len() != t.len() {
            return Err(Error::usage(
                "MLP inputs and targets must be non-empty and aligned",
            ));
        }
        if let Some(r) = x.iter().find(|r| r.len() != self.n_inputs()) {
            return Err(Error::usage(format!(
                "MLP expects {} inputs, got {}",
                self.n_inputs(),
                r.len()
            )));
        }
        match (self.task, t) {
            (MlpTask::Classifier { n_classes }, Targets::Labels(l)) => {
                if l.iter().any(|c| *c >= n_classes) {
                    return Err(Error::data("label out of range"));
                }
            }
            (MlpTask::Regressor, Targets::Values(_)) => {}
            _ => return Err(Error::usage("targets do not match the MLP task")),
        }
        Ok(())
    }

    /// Adam on shuffled mini-batches, continuing from the current weights.
    pub fn train(&mut self, x: &[Vec<f64>], t: Targets, p: &MlpParams, seed: u64) -> Result<()> {
        self.check_inputs(x, t)?;
        if p.batch_size == 0 {
            return Err(Error::usage("batch size must be positive"));
        }
        let np = self.params.len();
        let mut m = vec![0.0; np];
        let mut v = vec![0.0; np];
        let mut grad = vec![0.0; np];
        let mut ws = self.workspace();
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut r = rng(derive_seed(seed, 1));
        let mut step = 0i32;
        for epoch in 0..p.epochs {
            order.shuffle(&mut r);
            let mut total = 0.0;
            let mut batches = 0usize;
            for batch in order.chunks(p.batch_size) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let loss =
                    self.accumulate(x, t, batch, &mut grad, &mut ws) + self.add_penalty(&mut grad);
                if !loss.is_finite() {
                    return Err(Error::numeric(format!(
                        "MLP loss became {loss} in epoch {}; lower the learning rate or standardize the inputs",
                        epoch + 1
                    )));
                }
                total += loss;
                batches += 1;
                step += 1;
                let c1 = 1.0 - p.beta1.powi(step);
                let c2 = 1.0 - p.beta2.powi(step);
                for k in 0..np {
                    m[k] = p.beta1 * m[k] + (1.0 - p.beta1) * grad[k];
                    v[k] = p.beta2 * v[k] + (1.0 - p.beta2) * grad[k] * grad[k];
                    self.params[k] -=
                        p.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + p.epsilon);
                }
            }
            self.loss_curve.push(total / batches as f64);
        }
        Ok(())
    }

    /// Softmax probabilities (classifier) or the single output (regressor) per row.
    pub fn outputs(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if let Some(r) = x.iter().find(|r| r.len() != self.n_inputs()) {
            return Err(Error::usage(format!(
                "MLP expects {} inputs, got {}",
                self.n_inputs(),
                r.len()
            )));
        }
        let mut ws = self.workspace();
        Ok(x.iter()
            .map(|row| {
                self.forward(row, &mut ws);
                ws.acts.last().expect("output layer").clone()
            })
            .collect())
    }

    pub fn predict_labels(&self, x: &[Vec<f64>]) -> Result<Vec<usize>> {
        Ok(self
            .outputs(x)?
            .iter()
            .map(|o| {
                o.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                    .map_or(0, |p| p.0)
            })
            .collect())
    }

    pub fn predict_values(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.outputs(x)?.into_iter().map(|o| o[0]).collect())
    }
}

pub fn mlp_fit(train: &LabeledMatrix, params: &MlpParams, seed: u64) -> Result<MlpModel> {
    let mut m = MlpModel::init(
        train.n_cols(),
        &params.hidden,
        MlpTask::Classifier {
            n_classes: train.n_classes(),
        },
        params.l2_alpha,
        seed,
    )?;
    m.train(&train.rows, Targets::Labels(&train.labels), params, seed)?;
    Ok(m)
}

pub fn mlp_fit_regressor(
    x: &[Vec<f64>],
    y: &[f64],
    params: &MlpParams,
    seed: u64,
) -> Result<MlpModel> {
    let d = x.first().map_or(0, Vec::len);
    let mut m = MlpModel::init(d, &params.hidden, MlpTask::Regressor, params.l2_alpha, seed)?;
    m.train(x, Targets::Values(y), params, seed)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn max_rel_grad_error(model: &MlpModel, x: &[Vec<f64>], t: Targets) -> f64 {
        let (_, g) = model.loss_and_gradient(x, t).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..model.params.len() {
            let mut p = model.clone();
            p.params[k] += h;
            let up = p.loss_and_gradient(x, t).unwrap().0;
            p.params[k] -= 2.0 * h;
            let down = p.loss_and_gradient(x, t).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - g[k]).abs() / (fd.abs() + g[k].abs()).max(1e-8);
            worst = worst.max(rel);
        }
        worst
    }

    fn small_data(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>, Vec<f64>) {
        let mut r = rng(seed);
        let x: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..2).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let l = (0..6).map(|i| i % 2).collect();
        let y = x.iter().map(|v| v[0] - 2.0 * v[1]).collect();
        (x, l, y)
    }

    #[test]
    fn gradient_check_classifier() {
        let (x, l, _) = small_data(1);
        let m = MlpModel::init(2, &[3], MlpTask::Classifier { n_classes: 2 }, 0.01, 4).unwrap();
        assert!(max_rel_grad_error(&m, &x, Targets::Labels(&l)) < 1e-4);
    }

    #[test]
    fn gradient_check_regressor() {
        let (x, _, y) = small_data(2);
        let m = MlpModel::init(2, &[3, 4], MlpTask::Regressor, 0.01, 5).unwrap();
        assert!(max_rel_grad_error(&m, &x, Targets::Values(&y)) < 1e-4);
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let (x, l, _) = small_data(3);
        let mut m = MlpModel::init(2, &[3], MlpTask::Classifier { n_classes: 4 }, 0.0, 1).unwrap();
        let (wo, _) = layer_offsets(&m.sizes)[1];
        for p in &mut m.params[wo..] {
            *p = 0.0;
        }
        let l: Vec<usize> = l.iter().map(|c| c + 1).collect();
        let (loss, _) = m.loss_and_gradient(&x, Targets::Labels(&l)).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn separable_blobs() {
        let mut r = rng(9);
        let g = Normal::new(0.0, 0.5).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let c = i % 2;
            let o = if c == 0 { -2.0 } else { 2.0 };
            rows.push(vec![o + g.sample(&mut r), o + g.sample(&mut r)]);
            labels.push(c);
        }
        let m = LabeledMatrix::new(
            vec!["a".into(), "b".into()],
            rows,
            labels,
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let p = MlpParams {
            hidden: vec![8],
            epochs: 200,
            ..MlpParams::default()
        };
        let model = mlp_fit(&m, &p, 3).unwrap();
        let pred = model.predict_labels(&m.rows).unwrap();
        let acc = pred.iter().zip(&m.labels).filter(|(a, b)| a == b).count() as f64 / 200.0;
        assert!(acc >= 0.99, "{acc}");
        assert_eq!(model, mlp_fit(&m, &p, 3).unwrap());
    }

    #[test]
    fn diverging_loss_is_numeric_error() {
        let (x, _, y) = small_data(4);
        let y: Vec<f64> = y.iter().map(|v| v * 1e200).collect();
        let p = MlpParams {
            hidden: vec![3],
            epochs: 5,
            ..MlpParams::default()
        };
        assert!(matches!(
            mlp_fit_regressor(&x, &y, &p, 0),
            Err(Error::Numeric(_))
        ));
    }
}
