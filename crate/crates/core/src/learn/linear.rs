//! Least squares with ridge, lasso and elastic-net penalties.
//!
//! The objective is `||y - Xw||^2 + z1 * ||w||_1 + z2 * ||w||^2`, fitted on
//! centered columns so the intercept is `mean(y) - mean(X) . w`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    None,
    Ridge { z: f64 },
    Lasso { z: f64 },
    ElasticNet { z1: f64, z2: f64 },
}

impl Penalty {
    /// `(z1, z2)` weights of the L1 and squared-L2 terms.
    pub fn weights(self) -> (f64, f64) {
        match self {
            Penalty::None => (0.0, 0.0),
            Penalty::Ridge { z } => (0.0, z),
            Penalty::Lasso { z } => (z, 0.0),
            Penalty::ElasticNet { z1, z2 } => (z1, z2),
        }
    }

    /// Overall strength split between the L1 and L2 terms by `l1_ratio`.
    pub fn elastic_net(strength: f64, l1_ratio: f64) -> Self {
        Penalty::ElasticNet {
            z1: strength * l1_ratio,
            z2: strength * (1.0 - l1_ratio),
        }
    }

    /// Weights matching the per-sample convention
    /// `(1/2n)||y - Xw||^2 + a*r*||w||_1 + (a*(1-r)/2)*||w||^2`, rescaled to
    /// the unnormalized objective for `n` rows.
    pub fn elastic_net_per_sample(alpha: f64, l1_ratio: f64, n: usize) -> Self {
        let n = n as f64;
        Penalty::ElasticNet {
            z1: 2.0 * n * alpha * l1_ratio,
            z2: n * alpha * (1.0 - l1_ratio),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Penalty::None => "none",
            Penalty::Ridge { .. } => "ridge",
            Penalty::Lasso { .. } => "lasso",
            Penalty::ElasticNet { .. } => "elasticnet",
        }
    }

    pub fn from_weights(name: &str, z1: f64, z2: f64) -> Result<Self> {
        match name.parse::<PenaltyKind>()? {
            PenaltyKind::None => Ok(Penalty::None),
            PenaltyKind::Ridge => Ok(Penalty::Ridge { z: z2 }),
            PenaltyKind::Lasso => Ok(Penalty::Lasso { z: z1 }),
            PenaltyKind::ElasticNet => Ok(Penalty::ElasticNet { z1, z2 }),
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    None,
    Ridge,
    Lasso,
    ElasticNet,
}

impl FromStr for PenaltyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "none" | "ols" | "linear" => Ok(PenaltyKind::None),
            "ridge" | "l2" => Ok(PenaltyKind::Ridge),
            "lasso" | "l1" => Ok(PenaltyKind::Lasso),
            "elasticnet" | "enet" => Ok(PenaltyKind::ElasticNet),
            other => Err(Error::usage(format!("unknown penalty '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    /// Closed form without an L1 term, coordinate descent otherwise.
    #[default]
    Auto,
    ClosedForm,
    CoordinateDescent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOptions {
    pub degree: usize,
    pub solver: Solver,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions {
            degree: 1,
            solver: Solver::Auto,
            tol: 1e-8,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub penalty: Penalty,
    pub degree: usize,
    /// Number of raw inputs before polynomial expansion.
    pub n_inputs: usize,
}

/// Exponent tuples of every monomial of total degree 1..=`degree` in
/// `d` variables, grouped by degree, each group in lexicographic order of
/// the variable multiset.
pub fn monomials(d: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for v in start..d {
            cur.push(v);
            rec(v, d, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 1..=degree {
        rec(0, d, deg, &mut Vec::new(), &mut out);
    }
    out
}

/// Expands each row into all monomials up to `degree`; degree 1 is the identity.
pub fn polynomial_features(x: &[Vec<f64>], degree: usize) -> Vec<Vec<f64>> {
    if degree <= 1 {
        return x.to_vec();
    }
    let d = x.first().map_or(0, Vec::len);
    let terms = monomials(d, degree);
    x.iter()
        .map(|r| {
            terms
                .iter()
                .map(|t| t.iter().map(|v| r[*v]).product())
                .collect()
        })
        .collect()
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Solves the SPD system `a x = b` by Cholesky; `None` when `a` is not
/// numerically positive definite.
pub fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1.0);
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 1e-12 * scale {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        z[i] = (b[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (z[i] - ((i + 1)..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

fn closed_form(xc: &[Vec<f64>], yc: &[f64], z2: f64, penalty: Penalty) -> Result<Vec<f64>> {
    let d = xc.first().map_or(0, Vec::len);
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for (r, y) in xc.iter().zip(yc) {
        for i in 0..d {
            b[i] += r[i] * y;
            for j in 0..=i {
                a[i][j] += r[i] * r[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            a[j][i] = a[i][j];
        }
        a[i][i] += z2;
    }
    cholesky_solve(&a, &b).ok_or_else(|| {
        let hint = if matches!(penalty, Penalty::None) {
            "; try a ridge penalty"
        } else {
            ""
        };
        Error::numeric(format!("normal equations are singular{hint}"))
    })
}

fn coordinate_descent(
    xc: &[Vec<f64>],
    yc: &[f64],
    z1: f64,
    z2: f64,
    opts: &LinearOptions,
) -> Result<Vec<f64>> {
    let n = xc.len();
    let d = xc.first().map_or(0, Vec::len);
    let cols: Vec<Vec<f64>> = (0..d).map(|j| xc.iter().map(|r| r[j]).collect()).collect();
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let mut w = vec![0.0; d];
    let mut resid = yc.to_vec();
    for _ in 0..opts.max_iter {
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            let denom = norms[j] + z2;
            if denom == 0.0 {
                continue;
            }
            let col = &cols[j];
            let rho: f64 = (0..n).map(|i| col[i] * resid[i]).sum::<f64>() + norms[j] * w[j];
            let new = soft_threshold(rho, z1 / 2.0) / denom;
            let delta = new - w[j];
            if delta != 0.0 {
                for i in 0..n {
                    resid[i] -= delta * col[i];
                }
                w[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < opts.tol {
            return Ok(w);
        }
    }
    Err(Error::numeric(format!(
        "coordinate descent did not converge in {} sweeps",
        opts.max_iter
    )))
}

pub fn linear_fit(
    x: &[Vec<f64>],
    y: &[f64],
    penalty: Penalty,
    opts: &LinearOptions,
) -> Result<LinearModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::usage(
            "X and y must be non-empty and of equal length",
        ));
    }
    if opts.degree == 0 {
        return Err(Error::usage("polynomial degree must be >= 1"));
    }
    let (z1, z2) = penalty.weights();
    if !(z1 >= 0.0 && z2 >= 0.0) {
        return Err(Error::usage("penalty weights must be >= 0"));
    }
    let n_inputs = x[0].len();
    if x.iter().any(|r| r.len() != n_inputs) {
        return Err(Error::data("ragged design matrix"));
    }
    let xe = polynomial_features(x, opts.degree);
    let d = xe[0].len();
    let means: Vec<f64> = (0..d)
        .map(|j| stats::mean(&xe.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    let ymean = stats::mean(y);
    let xc: Vec<Vec<f64>> = xe
        .iter()
        .map(|r| r.iter().zip(&means).map(|(v, m)| v - m).collect())
        .collect();
    let yc: Vec<f64> = y.iter().map(|v| v - ymean).collect();

    let use_cd = match opts.solver {
        Solver::CoordinateDescent => true,
        Solver::ClosedForm => {
            if z1 > 0.0 {
                return Err(Error::usage(
                    "the closed form has no L1 term; use coordinate descent",
                ));
            }
            false
        }
        Solver::Auto => z1 > 0.0,
    };
    let weights = if use_cd {
        coordinate_descent(&xc, &yc, z1, z2, opts)?
    } else {
        closed_form(&xc, &yc, z2, penalty)?
    };
    let intercept = ymean - weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
    if weights.iter().any(|w| !w.is_finite()) || !intercept.is_finite() {
        return Err(Error::numeric("non-finite coefficients"));
    }
    Ok(LinearModel {
        weights,
        intercept,
        penalty,
        degree: opts.degree,
        n_inputs,
    })
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let expanded;
        let r = if self.degree > 1 {
            expanded = polynomial_features(&[row.to_vec()], self.degree).remove(0);
            &expanded[..]
        } else {
            row
        };
        self.intercept + r.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let Some(r) = x.iter().find(|r| r.len() != self.n_inputs) {
            return Err(Error::usage(format!(
                "model expects {} inputs, got {}",
                self.n_inputs,
                r.len()
            )));
        }
        Ok(x.iter().map(|r| self.predict_row(r)).collect())
    }
}

pub fn linear_predict(model: &LinearModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    model.predict(x)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::usage(format!(
            "rmse: {} predictions vs {} targets",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::usage("rmse of an empty series"));
    }
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((s / pred.len() as f64).sqrt())
}

/// `Y = B0 + B1*gaze + B2*yaw + B3*pitch` for one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    pub condition: String,
    pub intercept: f64,
    pub coefficients: [f64; 3],
}

impl fmt::Display for ErrorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [b1, b2, b3] = self.coefficients;
        write!(
            f,
            "{}: Y = {:e} + {}*X1 + {}*X2 + {}*X3",
            self.condition, self.intercept, b1, b2, b3
        )
    }
}

pub fn export_error_model(model: &LinearModel, condition: &str) -> Result<ErrorModel> {
    if model.n_inputs != 3 || model.degree != 1 {
        return Err(Error::usage(format!(
            "error model needs a degree-1 fit on 3 inputs [gaze, yaw, pitch], got {} inputs at degree {}",
            model.n_inputs, model.degree
        )));
    }
    Ok(ErrorModel {
        condition: condition.to_string(),
        intercept: model.intercept,
        coefficients: [model.weights[0], model.weights[1], model.weights[2]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_problem(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut r = rng(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let w: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
        let y = x
            .iter()
            .map(|row| {
                row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
                    + 0.1 * r.random_range(-1.0..1.0)
                    + 0.7
            })
            .collect();
        (x, y)
    }

    fn cd() -> LinearOptions {
        LinearOptions {
            solver: Solver::CoordinateDescent,
            ..LinearOptions::default()
        }
    }

    #[test]
    fn exact_line() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64).collect();
        let m = linear_fit(&x, &y, Penalty::None, &LinearOptions::default()).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-9);
        assert!(m.intercept.abs() < 1e-9);
    }

    #[test]
    fn strong_ridge_shrinks() {
        let (x, y) = random_problem(50, 3, 1);
        let m = linear_fit(&x, &y, Penalty::Ridge { z: 1e6 }, &LinearOptions::default()).unwrap();
        assert!(m.weights.iter().map(|w| w * w).sum::<f64>().sqrt() < 0.01);
    }

    #[test]
    fn singular_ols_suggests_ridge() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let e = linear_fit(&x, &y, Penalty::None, &LinearOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Numeric(_)));
        assert!(e.to_string().contains("ridge"));
        assert!(linear_fit(&x, &y, Penalty::Ridge { z: 0.1 }, &LinearOptions::default()).is_ok());
    }

    #[test]
    fn monomial_count() {
        // C(d + k, k) - 1 terms up to degree k
        assert_eq!(monomials(3, 2).len(), 9);
        assert_eq!(monomials(3, 3).len(), 19);
        assert_eq!(
            polynomial_features(&[vec![2.0, 3.0]], 2),
            vec![vec![2.0, 3.0, 4.0, 6.0, 9.0]]
        );
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[1.0, 2.0], &[3.0, 4.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn export_requires_three_inputs() {
        let (x, y) = random_problem(30, 2, 2);
        let m = linear_fit(&x, &y, Penalty::None, &LinearOptions::default()).unwrap();
        assert!(matches!(export_error_model(&m, "X"), Err(Error::Usage(_))));
        let (x, y) = random_problem(30, 3, 2);
        let m = linear_fit(&x, &y, Penalty::None, &LinearOptions::default()).unwrap();
        let e = export_error_model(&m, "HeadRoll20").unwrap();
        assert_eq!(e.coefficients.to_vec(), m.weights);
    }

    proptest! {
        #[test]
        fn ridge_cd_matches_closed_form(seed in 0u64..500, z in 0.0f64..20.0) {
            let (x, y) = random_problem(40, 4, seed);
            let a = linear_fit(&x, &y, Penalty::Ridge { z }, &LinearOptions::default()).unwrap();
            let b = linear_fit(&x, &y, Penalty::Ridge { z }, &cd()).unwrap();
            for (p, q) in a.weights.iter().zip(&b.weights) {
                prop_assert!((p - q).abs() < 1e-6);
            }
            prop_assert!((a.intercept - b.intercept).abs() < 1e-6);
        }

        #[test]
        fn lasso_subgradient_optimality(seed in 0u64..500, z in 0.0f64..10.0) {
            let (x, y) = random_problem(40, 4, seed);
            let m = linear_fit(&x, &y, Penalty::Lasso { z }, &LinearOptions::default()).unwrap();
            let pred = m.predict(&x).unwrap();
            for j in 0..4 {
                // gradient of the squared loss: -2 x_j . r
                let g: f64 = -2.0 * x.iter().zip(y.iter().zip(&pred)).map(|(r, (t, p))| r[j] * (t - p)).sum::<f64>();
                if m.weights[j] != 0.0 {
                    prop_assert!((g + z * m.weights[j].signum()).abs() < 1e-5);
                } else {
                    prop_assert!(g.abs() <= z + 1e-5);
                }
            }
        }
    }
}
