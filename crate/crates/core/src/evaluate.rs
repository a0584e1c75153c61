//! Cross-validation, grid search, classification metrics and learning curves.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{LabeledMatrix, Standardizer};
use crate::learn::forest::forest_fit_rows;
use crate::learn::mlp::{MlpModel, Targets};
use crate::learn::svm::svm_fit_rows;
use crate::learn::{accuracy, ForestParams, KnnModel, MlpParams, MlpTask, Model, SvmParams};
use crate::seed::{derive_seed, rng};
use crate::stats;

/// A model family with concrete hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Knn { k: usize },
    Svm(SvmParams),
    Mlp(MlpParams),
    Forest(ForestParams),
}

impl ModelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::Svm(_) => "svm",
            ModelSpec::Mlp(_) => "mlp",
            ModelSpec::Forest(_) => "forest",
        }
    }

    /// Human-readable parameter list, e.g. `C=10;gamma=1`.
    pub fn param_key(&self) -> String {
        match self {
            ModelSpec::Knn { k } => format!("k={k}"),
            ModelSpec::Svm(p) => format!("C={};gamma={}", p.c, p.gamma),
            ModelSpec::Mlp(p) => format!(
                "layers={};alpha={}",
                p.hidden
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join("-"),
                p.l2_alpha
            ),
            ModelSpec::Forest(p) => {
                format!("n_estimators={};max_depth={}", p.n_estimators, p.max_depth)
            }
        }
    }

    /// Numeric parameter tuple used to break grid-search ties. MLP tuples
    /// lead with alpha so tuples of different layer depths stay comparable.
    pub fn param_tuple(&self) -> Vec<f64> {
        match self {
            ModelSpec::Knn { k } => vec![*k as f64],
            ModelSpec::Svm(p) => vec![p.c, p.gamma],
            ModelSpec::Mlp(p) => std::iter::once(p.l2_alpha)
                .chain(p.hidden.iter().map(|h| *h as f64))
                .collect(),
            ModelSpec::Forest(p) => vec![p.n_estimators as f64, p.max_depth as f64],
        }
    }

    pub fn fit_rows(
        &self,
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Result<Model> {
        Ok(match self {
            ModelSpec::Knn { k } => Model::Knn(KnnModel::fit(
                rows.to_vec(),
                labels.to_vec(),
                n_classes,
                *k,
            )?),
            ModelSpec::Svm(p) => Model::Svm(svm_fit_rows(rows, labels, n_classes, p)?),
            ModelSpec::Mlp(p) => {
                let d = rows.first().map_or(0, Vec::len);
                let mut m = MlpModel::init(
                    d,
                    &p.hidden,
                    MlpTask::Classifier { n_classes },
                    p.l2_alpha,
                    seed,
                )?;
                m.train(rows, Targets::Labels(labels), p, seed)?;
                Model::Mlp(m)
            }
            ModelSpec::Forest(p) => {
                Model::Forest(forest_fit_rows(rows, labels, n_classes, p, seed)?)
            }
        })
    }

    pub fn fit(&self, train: &LabeledMatrix, seed: u64) -> Result<Model> {
        self.fit_rows(&train.rows, &train.labels, train.n_classes(), seed)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family(), self.param_key())
    }
}

/// Default search grids per family.
pub fn default_grid(family: &str) -> Result<Vec<ModelSpec>> {
    Ok(match family {
        "knn" => [1, 3, 5, 7, 9]
            .into_iter()
            .map(|k| ModelSpec::Knn { k })
            .collect(),
        "svm" => {
            let mut g = Vec::new();
            for c in [0.1, 1.0, 5.0, 10.0, 100.0] {
                for gamma in [0.1, 0.5, 1.0, 1.25, 2.0] {
                    g.push(ModelSpec::Svm(SvmParams {
                        c,
                        gamma,
                        ..SvmParams::default()
                    }));
                }
            }
            g
        }
        "mlp" => {
            let mut g = Vec::new();
            for hidden in [vec![50], vec![100], vec![50, 100, 50], vec![100, 100]] {
                for l2_alpha in [0.001, 0.01, 0.1, 0.5] {
                    g.push(ModelSpec::Mlp(MlpParams {
                        hidden: hidden.clone(),
                        l2_alpha,
                        ..MlpParams::default()
                    }));
                }
            }
            g
        }
        other => {
            return Err(Error::usage(format!(
                "no default grid for model family '{other}'"
            )))
        }
    })
}

/// Stratified folds: each class is shuffled and dealt round-robin, with the
/// dealing position carried across classes so fold sizes differ by at most one.
pub fn stratified_folds(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::usage("k_folds must be at least 2"));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, l) in labels.iter().enumerate() {
        if *l >= n_classes {
            return Err(Error::data(format!("label {l} out of range")));
        }
        by_class[*l].push(i);
    }
    for (c, idx) in by_class.iter().enumerate() {
        if !idx.is_empty() && idx.len() < k {
            return Err(Error::usage(format!(
                "class {c} has {} rows, fewer than {k} folds",
                idx.len()
            )));
        }
    }
    let mut r = rng(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut idx in by_class {
        idx.shuffle(&mut r);
        for i in idx {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvOptions {
    /// Refit standardization on each training fold.
    pub standardize: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { standardize: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub fold_scores: Vec<f64>,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
    pub folds: Vec<Vec<usize>>,
    /// Out-of-fold prediction for every row.
    pub predictions: Vec<usize>,
    /// Standardization fitted on each training fold (empty when disabled).
    pub fold_standardizers: Vec<Standardizer>,
}

fn fold_train(folds: &[Vec<usize>], f: usize) -> Vec<usize> {
    let mut v: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(g, _)| *g != f)
        .flat_map(|(_, idx)| idx.iter().copied())
        .collect();
    v.sort_unstable();
    v
}

/// Fits on `train` rows and scores on `test` rows. Standardization
/// parameters come from `train` only.
fn fit_and_score(
    m: &LabeledMatrix,
    spec: &ModelSpec,
    train: &[usize],
    test: &[usize],
    opts: &CvOptions,
    seed: u64,
) -> Result<(Vec<usize>, f64, Option<Standardizer>, Model, Vec<Vec<f64>>)> {
    let mut tr: Vec<Vec<f64>> = train.iter().map(|i| m.rows[*i].clone()).collect();
    let mut te: Vec<Vec<f64>> = test.iter().map(|i| m.rows[*i].clone()).collect();
    let labels: Vec<usize> = train.iter().map(|i| m.labels[*i]).collect();
    let std = if opts.standardize {
        let s = Standardizer::fit(&tr, &m.columns)?;
        tr = s.transform(&tr);
        te = s.transform(&te);
        Some(s)
    } else {
        None
    };
    let model = spec.fit_rows(&tr, &labels, m.n_classes(), seed)?;
    let pred = model.predict_labels(&te)?;
    let truth: Vec<usize> = test.iter().map(|i| m.labels[*i]).collect();
    let acc = accuracy(&pred, &truth);
    Ok((pred, acc, std, model, tr))
}

pub fn kfold_cv(m: &LabeledMatrix, spec: &ModelSpec, k: usize, seed: u64) -> Result<CvResult> {
    kfold_cv_with(m, spec, k, seed, &CvOptions::default())
}

pub fn kfold_cv_with(
    m: &LabeledMatrix,
    spec: &ModelSpec,
    k: usize,
    seed: u64,
    opts: &CvOptions,
) -> Result<CvResult> {
    let folds = stratified_folds(&m.labels, m.n_classes(), k, seed)?;
    let outcomes = (0..k)
        .into_par_iter()
        .map(|f| {
            let train = fold_train(&folds, f);
            let (pred, acc, std, _, _) = fit_and_score(
                m,
                spec,
                &train,
                &folds[f],
                opts,
                derive_seed(seed, f as u64),
            )?;
            Ok((pred, acc, std))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut predictions = vec![0; m.n_rows()];
    let mut fold_scores = Vec::with_capacity(k);
    let mut fold_standardizers = Vec::new();
    for (f, (pred, acc, std)) in outcomes.into_iter().enumerate() {
        for (i, p) in folds[f].iter().zip(pred) {
            predictions[*i] = p;
        }
        fold_scores.push(acc);
        fold_standardizers.extend(std);
    }
    Ok(CvResult {
        mean_accuracy: stats::mean(&fold_scores),
        sd_accuracy: stats::sample_sd(&fold_scores),
        fold_scores,
        folds,
        predictions,
        fold_standardizers,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub spec: ModelSpec,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
    pub fold_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub best: usize,
}

impl GridResult {
    pub fn best_spec(&self) -> &ModelSpec {
        &self.rows[self.best].spec
    }
}

fn tuple_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Every cell is scored on the same folds. Best is the highest mean CV
/// accuracy, ties to the smallest parameter tuple.
pub fn grid_search(
    m: &LabeledMatrix,
    grid: &[ModelSpec],
    k: usize,
    seed: u64,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::usage("empty parameter grid"));
    }
    let rows = grid
        .par_iter()
        .map(|spec| {
            let cv = kfold_cv(m, spec, k, seed)?;
            Ok(GridRow {
                spec: spec.clone(),
                mean_accuracy: cv.mean_accuracy,
                sd_accuracy: cv.sd_accuracy,
                fold_scores: cv.fold_scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = (0..rows.len())
        .min_by(|a, b| {
            rows[*b]
                .mean_accuracy
                .total_cmp(&rows[*a].mean_accuracy)
                .then_with(|| tuple_cmp(&rows[*a].spec.param_tuple(), &rows[*b].spec.param_tuple()))
        })
        .expect("non-empty grid");
    Ok(GridResult { rows, best })
}

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub tpr: f64,
    pub fpr: f64,
    pub tnr: f64,
    pub fnr: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassRates {
    pub rates: RateReport,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// The class was never predicted, so precision is reported as 0.
    pub precision_undefined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassRates>,
    /// Unweighted mean of the per-class rates.
    pub macro_avg: RateReport,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn classification_report(
    truth: &[usize],
    pred: &[usize],
    class_names: &[String],
) -> Result<ClassificationReport> {
    let n_classes = class_names.len();
    if truth.len() != pred.len() {
        return Err(Error::usage(format!(
            "{} truth labels vs {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (t, p) in truth.iter().zip(pred) {
        if *t >= n_classes || *p >= n_classes {
            return Err(Error::data(format!("label outside 0..{n_classes}")));
        }
        counts[*t][*p] += 1;
    }
    let total = truth.len();
    let per_class: Vec<ClassRates> = (0..n_classes)
        .map(|c| {
            let tp = counts[c][c];
            let fn_ = counts[c].iter().sum::<usize>() - tp;
            let fp = (0..n_classes).map(|t| counts[t][c]).sum::<usize>() - tp;
            let tn = total - tp - fn_ - fp;
            // a class absent from the truth has no positives; treat it as all missed
            let tpr = ratio(tp, tp + fn_).unwrap_or(0.0);
            let fpr = ratio(fp, fp + tn).unwrap_or(0.0);
            let precision = ratio(tp, tp + fp);
            ClassRates {
                rates: RateReport {
                    tpr,
                    fnr: 1.0 - tpr,
                    fpr,
                    tnr: 1.0 - fpr,
                    precision: precision.unwrap_or(0.0),
                },
                tp,
                fp,
                tn,
                fn_,
                precision_undefined: precision.is_none(),
            }
        })
        .collect();
    let avg = |f: fn(&RateReport) -> f64| {
        per_class.iter().map(|c| f(&c.rates)).sum::<f64>() / n_classes.max(1) as f64
    };
    let macro_avg = RateReport {
        tpr: avg(|r| r.tpr),
        fpr: avg(|r| r.fpr),
        tnr: avg(|r| r.tnr),
        fnr: avg(|r| r.fnr),
        precision: avg(|r| r.precision),
    };
    Ok(ClassificationReport {
        confusion: ConfusionMatrix {
            class_names: class_names.to_vec(),
            counts,
        },
        accuracy: accuracy(pred, truth),
        per_class,
        macro_avg,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub train_sizes: Vec<usize>,
    pub train_scores: Vec<f64>,
    pub cv_scores: Vec<f64>,
}

/// Stratified subsample of `size` rows from `pool`.
fn stratified_subsample(
    pool: &[usize],
    labels: &[usize],
    n_classes: usize,
    size: usize,
    seed: u64,
) -> Vec<usize> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for i in pool {
        by_class[labels[*i]].push(*i);
    }
    let weights: Vec<f64> = by_class.iter().map(|v| v.len() as f64).collect();
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| size as f64 * w / sum).collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..n_classes).collect();
    order.sort_by(|a, b| {
        (quotas[*b] - quotas[*b].floor())
            .total_cmp(&(quotas[*a] - quotas[*a].floor()))
            .then(a.cmp(b))
    });
    let short = size - take.iter().sum::<usize>();
    for c in order.into_iter().take(short) {
        take[c] += 1;
    }
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(size);
    for (c, mut idx) in by_class.into_iter().enumerate() {
        idx.shuffle(&mut r);
        out.extend_from_slice(&idx[..take[c].min(idx.len())]);
    }
    out.sort_unstable();
    out
}

/// For each size, fits on a stratified subsample of every training fold and
/// averages training and held-out fold accuracy over the folds.
pub fn learning_curve(
    m: &LabeledMatrix,
    spec: &ModelSpec,
    sizes: &[usize],
    k: usize,
    seed: u64,
) -> Result<LearningCurve> {
    if sizes.is_empty() || sizes.contains(&0) || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::usage(
            "learning-curve sizes must be positive and strictly increasing",
        ));
    }
    let folds = stratified_folds(&m.labels, m.n_classes(), k, seed)?;
    let smallest_train = (0..k)
        .map(|f| m.n_rows() - folds[f].len())
        .min()
        .unwrap_or(0);
    let max = *sizes.last().expect("non-empty");
    if max > smallest_train {
        return Err(Error::usage(format!(
            "largest size {max} exceeds the {smallest_train} rows of the smallest training fold"
        )));
    }
    let opts = CvOptions::default();
    let cells: Vec<(usize, usize)> = (0..sizes.len())
        .flat_map(|s| (0..k).map(move |f| (s, f)))
        .collect();
    let scores = cells
        .par_iter()
        .map(|&(s, f)| {
            let cell_seed = derive_seed(seed, (s * k + f) as u64 + 1);
            let pool = fold_train(&folds, f);
            let sub = stratified_subsample(&pool, &m.labels, m.n_classes(), sizes[s], cell_seed);
            let (_, cv_acc, _, model, tr) =
                fit_and_score(m, spec, &sub, &folds[f], &opts, cell_seed)?;
            let truth: Vec<usize> = sub.iter().map(|i| m.labels[*i]).collect();
            let train_acc = accuracy(&model.predict_labels(&tr)?, &truth);
            Ok((train_acc, cv_acc))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut train_scores = vec![0.0; sizes.len()];
    let mut cv_scores = vec![0.0; sizes.len()];
    for ((s, _), (tr, cv)) in cells.iter().zip(scores) {
        train_scores[*s] += tr / k as f64;
        cv_scores[*s] += cv / k as f64;
    }
    Ok(LearningCurve {
        train_sizes: sizes.to_vec(),
        train_scores,
        cv_scores,
    })
}

/// Minimum training rows by the rule of ten samples per feature.
pub fn rule_of_ten(n_features: usize) -> usize {
    10 * n_features
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::data(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rows are true classes, columns predicted classes.
pub fn write_confusion_csv(cm: &ConfusionMatrix, path: impl AsRef<Path>) -> Result<()> {
    let header: Vec<String> = std::iter::once("true\\pred".to_string())
        .chain(cm.class_names.iter().cloned())
        .collect();
    let rows: Vec<Vec<String>> = cm
        .class_names
        .iter()
        .zip(&cm.counts)
        .map(|(n, r)| {
            std::iter::once(n.clone())
                .chain(r.iter().map(usize::to_string))
                .collect()
        })
        .collect();
    write_rows(path.as_ref(), &header, &rows)
}

pub fn write_rates_csv(rep: &ClassificationReport, path: impl AsRef<Path>) -> Result<()> {
    let header: Vec<String> = [
        "class",
        "tpr",
        "fpr",
        "tnr",
        "fnr",
        "precision",
        "precision_undefined",
    ]
    .map(String::from)
    .to_vec();
    let fmt = |name: &str, r: &RateReport, undef: bool| {
        vec![
            name.to_string(),
            r.tpr.to_string(),
            r.fpr.to_string(),
            r.tnr.to_string(),
            r.fnr.to_string(),
            r.precision.to_string(),
            undef.to_string(),
        ]
    };
    let mut rows: Vec<Vec<String>> = rep
        .confusion
        .class_names
        .iter()
        .zip(&rep.per_class)
        .map(|(n, c)| fmt(n, &c.rates, c.precision_undefined))
        .collect();
    rows.push(fmt(
        "macro",
        &rep.macro_avg,
        rep.per_class.iter().any(|c| c.precision_undefined),
    ));
    write_rows(path.as_ref(), &header, &rows)
}

pub fn write_cv_csv(cv: &CvResult, spec: &ModelSpec, path: impl AsRef<Path>) -> Result<()> {
    let header: Vec<String> = ["model", "params", "fold", "accuracy"]
        .map(String::from)
        .to_vec();
    let mut rows: Vec<Vec<String>> = cv
        .fold_scores
        .iter()
        .enumerate()
        .map(|(f, a)| {
            vec![
                spec.family().into(),
                spec.param_key(),
                (f + 1).to_string(),
                a.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        spec.family().into(),
        spec.param_key(),
        "mean".into(),
        cv.mean_accuracy.to_string(),
    ]);
    rows.push(vec![
        spec.family().into(),
        spec.param_key(),
        "sd".into(),
        cv.sd_accuracy.to_string(),
    ]);
    write_rows(path.as_ref(), &header, &rows)
}

pub fn write_grid_csv(g: &GridResult, path: impl AsRef<Path>) -> Result<()> {
    let header: Vec<String> = ["model", "params", "mean_accuracy", "sd_accuracy", "best"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = g
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                r.spec.family().into(),
                r.spec.param_key(),
                r.mean_accuracy.to_string(),
                r.sd_accuracy.to_string(),
                (i == g.best).to_string(),
            ]
        })
        .collect();
    write_rows(path.as_ref(), &header, &rows)
}

pub fn write_learning_curve_csv(lc: &LearningCurve, path: impl AsRef<Path>) -> Result<()> {
    let header: Vec<String> = ["train_size", "train_score", "cv_score"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = (0..lc.train_sizes.len())
        .map(|i| {
            vec![
                lc.train_sizes[i].to_string(),
                lc.train_scores[i].to_string(),
                lc.cv_scores[i].to_string(),
            ]
        })
        .collect();
    write_rows(path.as_ref(), &header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|c| format!("c{c}")).collect()
    }

    #[test]
    fn hand_counted_two_class_report() {
        let r = classification_report(&[0, 0, 1, 1], &[0, 1, 1, 1], &names(2)).unwrap();
        assert_eq!(r.confusion.counts, vec![vec![1, 1], vec![0, 2]]);
        assert!((r.per_class[0].rates.tpr - 0.5).abs() < 1e-12);
        assert_eq!(r.per_class[0].rates.fpr, 0.0);
        assert_eq!(r.per_class[1].rates.tpr, 1.0);
        assert!((r.per_class[1].rates.fpr - 0.5).abs() < 1e-12);
        assert!((r.macro_avg.precision - 0.8333333333333334).abs() < 1e-4);
    }

    #[test]
    fn perfect_predictions() {
        let t = vec![0, 1, 2, 2, 1];
        let r = classification_report(&t, &t, &names(3)).unwrap();
        assert_eq!(r.macro_avg.tpr, 1.0);
        assert_eq!(r.macro_avg.fpr, 0.0);
        assert_eq!(r.macro_avg.precision, 1.0);
    }

    #[test]
    fn never_predicted_class_is_flagged() {
        let r = classification_report(&[0, 1, 2], &[0, 0, 0], &names(3)).unwrap();
        assert!(r.per_class[1].precision_undefined);
        assert_eq!(r.per_class[1].rates.precision, 0.0);
        assert!(matches!(
            classification_report(&[0], &[3], &names(3)),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn folds_of_100_rows() {
        let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let folds = stratified_folds(&labels, 4, 10, 3).unwrap();
        assert!(folds.iter().all(|f| f.len() == 10));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(matches!(
            stratified_folds(&[0, 0, 1], 2, 2, 0),
            Err(Error::Usage(_))
        ));
    }

    fn clusters(n_per: usize, seed: u64) -> LabeledMatrix {
        let mut r = rng(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3 {
            for _ in 0..n_per {
                rows.push(vec![
                    c as f64 * 4.0 + r.random_range(-1.0..1.0),
                    r.random_range(-1.0..1.0),
                ]);
                labels.push(c);
            }
        }
        LabeledMatrix::new(vec!["a".into(), "b".into()], rows, labels, names(3)).unwrap()
    }

    #[test]
    fn separable_cv_is_perfect() {
        let m = clusters(20, 1);
        let cv = kfold_cv(&m, &ModelSpec::Knn { k: 1 }, 5, 2).unwrap();
        assert_eq!(cv.mean_accuracy, 1.0);
        assert_eq!(cv.fold_scores.len(), 5);
    }

    #[test]
    fn standardization_is_fit_on_training_folds_only() {
        let m = clusters(20, 4);
        let cv = kfold_cv(&m, &ModelSpec::Knn { k: 3 }, 4, 9).unwrap();
        for (f, s) in cv.fold_standardizers.iter().enumerate() {
            let train: Vec<Vec<f64>> = fold_train(&cv.folds, f)
                .iter()
                .map(|i| m.rows[*i].clone())
                .collect();
            assert_eq!(*s, Standardizer::fit(&train, &m.columns).unwrap());
            // moving the held-out rows leaves the fitted parameters alone
            let mut moved = m.clone();
            for i in &cv.folds[f] {
                moved.rows[*i][0] += 1000.0;
            }
            let again = kfold_cv(&moved, &ModelSpec::Knn { k: 3 }, 4, 9).unwrap();
            assert_eq!(again.fold_standardizers[f], *s);
        }
    }

    #[test]
    fn grid_prefers_three_neighbors() {
        // each query has two same-class points a little closer than any
        // single other-class point, and then one more same-class point, so
        // k = 1 and k = 3 both hit; label noise only fools k = 1
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for g in 0..30 {
            let base = g as f64 * 10.0;
            let c = g % 2;
            for d in [0.0, 0.3, 0.6] {
                rows.push(vec![base + d]);
                labels.push(c);
            }
            // a mislabeled twin sitting on the first point
            rows.push(vec![base + 0.01]);
            labels.push(1 - c);
        }
        let m = LabeledMatrix::new(vec!["x".into()], rows, labels, names(2)).unwrap();
        let grid = default_grid("knn").unwrap();
        let g = grid_search(&m, &grid, 4, 5).unwrap();
        assert_eq!(g.rows.len(), 5);
        assert_eq!(
            g.best_spec(),
            &ModelSpec::Knn { k: 3 },
            "{:?}",
            g.rows.iter().map(|r| r.mean_accuracy).collect::<Vec<_>>()
        );
        assert_eq!(g, grid_search(&m, &grid, 4, 5).unwrap());
    }

    #[test]
    fn single_cell_grid_and_ties() {
        let m = clusters(10, 2);
        let g = grid_search(&m, &[ModelSpec::Knn { k: 5 }], 5, 1).unwrap();
        assert_eq!(g.best, 0);
        // perfectly separable: all k tie at 1.0, smallest wins
        let g = grid_search(
            &m,
            &[
                ModelSpec::Knn { k: 5 },
                ModelSpec::Knn { k: 1 },
                ModelSpec::Knn { k: 3 },
            ],
            5,
            1,
        )
        .unwrap();
        assert_eq!(g.best_spec(), &ModelSpec::Knn { k: 1 });
    }

    #[test]
    fn learning_curve_shape() {
        let m = clusters(40, 3);
        let lc = learning_curve(&m, &ModelSpec::Knn { k: 1 }, &[10, 30, 60], 4, 1).unwrap();
        assert_eq!(lc.train_scores.len(), 3);
        assert_eq!(lc.cv_scores.len(), 3);
        assert!(learning_curve(&m, &ModelSpec::Knn { k: 1 }, &[30, 10], 4, 1).is_err());
        assert!(learning_curve(&m, &ModelSpec::Knn { k: 1 }, &[1000], 4, 1).is_err());
    }

    proptest! {
        #[test]
        fn rates_are_complementary(truth in prop::collection::vec(0usize..4, 1..60), seed in 0u64..100) {
            let mut r = rng(seed);
            let pred: Vec<usize> = truth.iter().map(|t| if r.random::<f64>() < 0.6 { *t } else { r.random_range(0..4) }).collect();
            let rep = classification_report(&truth, &pred, &names(4)).unwrap();
            for c in &rep.per_class {
                prop_assert!((c.rates.tpr + c.rates.fnr - 1.0).abs() < 1e-9);
                prop_assert!((c.rates.tnr + c.rates.fpr - 1.0).abs() < 1e-9);
            }
            for (c, row) in rep.confusion.counts.iter().enumerate() {
                prop_assert_eq!(row.iter().sum::<usize>(), truth.iter().filter(|t| **t == c).count());
            }
            prop_assert_eq!(rep.confusion.total(), truth.len());
        }

        #[test]
        fn folds_partition(n in 20usize..120, k in 2usize..6, seed in 0u64..100) {
            let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let folds = stratified_folds(&labels, 3, k, seed).unwrap();
            let mut all: Vec<usize> = folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
