//! Feature vectors, labeled matrices, standardization and splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::analysis::{clean_errors, describe, CleanMethod};
use crate::augment::{augment_sample_with, AugmentParams};
use crate::dataset::{fill_missing, Condition, GazeSession, Platform, AOI_COUNT};
use crate::error::{Error, Result};
use crate::geometry::{compute_errors, Category, ErrorSeries};
use crate::seed::{derive_seed, rng};
use crate::stats;

pub mod tsne;

pub use tsne::{tsne, TsneParams, TsneResult};

pub const FEATURE_LEN: usize = AOI_COUNT + 5;
pub const REDUCED_LEN: usize = 5;

/// Column names of a full feature vector, in order.
pub fn feature_names() -> Vec<String> {
    let mut v: Vec<String> = (1..=AOI_COUNT).map(|k| format!("aoi_{k:02}")).collect();
    v.extend(["mean", "sd", "iqr", "ci_lo", "ci_hi"].map(String::from));
    v
}

pub fn reduced_feature_names() -> Vec<String> {
    ["mean", "sd", "ci_lo", "ci_hi", "iqr"]
        .map(String::from)
        .to_vec()
}

/// Per-AOI errors followed by five summary statistics of one category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub aoi_err: [f64; AOI_COUNT],
    pub mean: f64,
    /// Sample standard deviation, as in [`describe`].
    pub sd: f64,
    pub iqr: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedFeatureVector {
    pub mean: f64,
    pub sd: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub iqr: f64,
}

impl FeatureVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.aoi_err.to_vec();
        v.extend([self.mean, self.sd, self.iqr, self.ci95_low, self.ci95_high]);
        v
    }

    pub fn reduced(&self) -> ReducedFeatureVector {
        ReducedFeatureVector {
            mean: self.mean,
            sd: self.sd,
            ci95_low: self.ci95_low,
            ci95_high: self.ci95_high,
            iqr: self.iqr,
        }
    }
}

impl ReducedFeatureVector {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.mean, self.sd, self.ci95_low, self.ci95_high, self.iqr]
    }
}

/// How the per-AOI entries summarize the samples at an AOI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AoiStat {
    #[default]
    MeanAbs,
    MeanSigned,
}

pub fn build_feature(errors: &ErrorSeries, category: Category) -> Result<FeatureVector> {
    build_feature_with(errors, category, AoiStat::MeanAbs)
}

pub fn build_feature_with(
    errors: &ErrorSeries,
    category: Category,
    aoi: AoiStat,
) -> Result<FeatureVector> {
    errors.check_consistent()?;
    if errors
        .aoi_ids
        .iter()
        .any(|id| *id == 0 || usize::from(*id) > AOI_COUNT)
    {
        return Err(Error::data("AOI id out of range 1..=15"));
    }
    let per_aoi = errors.per_aoi_mean(category, aoi == AoiStat::MeanAbs);
    let mut aoi_err = [0.0; AOI_COUNT];
    for (k, v) in per_aoi.iter().enumerate() {
        aoi_err[k] = v.ok_or_else(|| Error::data(format!("AOI {} has no samples", k + 1)))?;
    }
    let d = describe(errors.channel(category))?;
    Ok(FeatureVector {
        aoi_err,
        mean: d.mean,
        sd: d.sd,
        iqr: d.iqr,
        ci95_low: d.ci95_low,
        ci95_high: d.ci95_high,
    })
}

/// Where a row came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RowInfo {
    pub participant: String,
    pub category: Option<Category>,
}

/// Fitted per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    /// Fails on a column with zero (or non-finite) variance, naming it.
    pub fn fit(rows: &[Vec<f64>], names: &[String]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.is_empty() {
            return Err(Error::data("cannot standardize an empty matrix"));
        }
        let mut means = Vec::with_capacity(d);
        let mut sds = Vec::with_capacity(d);
        for j in 0..d {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let sd = stats::population_sd(&col);
            if !(sd > 0.0) || !sd.is_finite() {
                let name = names.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
                return Err(Error::data(format!("column '{name}' has zero variance")));
            }
            means.push(stats::mean(&col));
            sds.push(sd);
        }
        Ok(Standardizer { means, sds })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    pub fn inverse(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.inverse_row(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub info: Vec<RowInfo>,
    /// Set once the rows have been standardized.
    pub standardization: Option<Standardizer>,
}

impl LabeledMatrix {
    pub fn new(
        columns: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let info = vec![RowInfo::default(); rows.len()];
        let m = LabeledMatrix {
            columns,
            rows,
            labels,
            class_names,
            info,
            standardization: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.len() != self.labels.len() || self.rows.len() != self.info.len() {
            return Err(Error::data("rows, labels and row info differ in length"));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() != self.columns.len() {
                return Err(Error::data(format!(
                    "row {i} has {} values, expected {}",
                    r.len(),
                    self.columns.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!("row {i} has a non-finite value")));
            }
        }
        if let Some(l) = self.labels.iter().find(|l| **l >= self.class_names.len()) {
            return Err(Error::data(format!("label {l} has no class name")));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for l in &self.labels {
            c[*l] += 1;
        }
        c
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledMatrix {
        LabeledMatrix {
            columns: self.columns.clone(),
            rows: idx.iter().map(|i| self.rows[*i].clone()).collect(),
            labels: idx.iter().map(|i| self.labels[*i]).collect(),
            class_names: self.class_names.clone(),
            info: idx.iter().map(|i| self.info[*i].clone()).collect(),
            standardization: self.standardization.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<LabeledMatrix> {
        if let Some(c) = cols.iter().find(|c| **c >= self.n_cols()) {
            return Err(Error::usage(format!("column index {c} out of range")));
        }
        Ok(LabeledMatrix {
            columns: cols.iter().map(|c| self.columns[*c].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| cols.iter().map(|c| r[*c]).collect())
                .collect(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            info: self.info.clone(),
            standardization: None,
        })
    }

    /// The five summary-statistic columns in reduced order.
    pub fn reduced(&self) -> Result<LabeledMatrix> {
        let cols: Vec<usize> = reduced_feature_names()
            .iter()
            .map(|n| {
                self.columns
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::data(format!("matrix has no '{n}' column")))
            })
            .collect::<Result<_>>()?;
        self.select_columns(&cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn participants(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.info.iter().map(|i| i.participant.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }
}

/// Standardizes every column with population statistics.
pub fn standardize(m: &LabeledMatrix) -> Result<(LabeledMatrix, Standardizer)> {
    let s = Standardizer::fit(&m.rows, &m.columns)?;
    let mut out = m.clone();
    out.rows = s.transform(&m.rows);
    out.standardization = Some(s.clone());
    Ok((out, s))
}

pub fn apply_standardizer(m: &LabeledMatrix, s: &Standardizer) -> Result<LabeledMatrix> {
    if s.means.len() != m.n_cols() {
        return Err(Error::usage("standardizer width does not match the matrix"));
    }
    let mut out = m.clone();
    out.rows = s.transform(&m.rows);
    out.standardization = Some(s.clone());
    Ok(out)
}

pub fn destandardize(m: &LabeledMatrix, s: &Standardizer) -> LabeledMatrix {
    let mut out = m.clone();
    out.rows = s.inverse(&m.rows);
    out.standardization = None;
    out
}

/// Classification task defining which conditions become which classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    UserDistance,
    HeadPose,
    PlatformPose,
    Mixed,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::UserDistance => "user_distance",
            Task::HeadPose => "head_pose",
            Task::PlatformPose => "platform_pose",
            Task::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "user_distance" | "ud" | "distance" => Ok(Task::UserDistance),
            "head_pose" | "head" => Ok(Task::HeadPose),
            "platform_pose" | "platform" | "tablet_pose" => Ok(Task::PlatformPose),
            "mixed" => Ok(Task::Mixed),
            other => Err(Error::usage(format!("unknown task '{other}'"))),
        }
    }
}

/// Class slots of a task. A slot lists the conditions that feed it, with
/// the first one preferred; the neutral slot of pose tasks falls back to UD60.
fn task_classes(task: Task, platform: Platform) -> Vec<(&'static str, Vec<Condition>)> {
    use Condition::*;
    let ud = vec![
        ("UD50", vec![UD50]),
        ("UD60", vec![UD60, Neutral]),
        ("UD70", vec![UD70]),
        ("UD80", vec![UD80]),
    ];
    let head = vec![
        ("HeadRoll20", vec![HeadRoll20]),
        ("HeadPitch20", vec![HeadPitch20]),
        ("HeadYaw20", vec![HeadYaw20]),
    ];
    let plat = vec![
        ("PlatRoll20", vec![PlatRoll20]),
        ("PlatPitch20", vec![PlatPitch20]),
        ("PlatYaw20", vec![PlatYaw20]),
    ];
    match task {
        Task::UserDistance => ud,
        Task::HeadPose => std::iter::once(("Neutral", vec![Neutral, UD60]))
            .chain(head)
            .collect(),
        Task::PlatformPose => std::iter::once(("Neutral", vec![Neutral, UD60]))
            .chain(plat)
            .collect(),
        Task::Mixed => ud
            .into_iter()
            .chain(match platform {
                Platform::Desktop => head,
                Platform::Tablet => plat,
            })
            .collect(),
    }
}

pub fn task_class_names(task: Task, platform: Platform) -> Vec<String> {
    task_classes(task, platform)
        .into_iter()
        .map(|(n, _)| n.to_string())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssembleOptions {
    pub augment: bool,
    pub clean: CleanMethod,
    pub aoi_stat: AoiStat,
    pub augment_params: AugmentParams,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            augment: true,
            clean: CleanMethod::default(),
            aoi_stat: AoiStat::MeanAbs,
            augment_params: AugmentParams::default(),
        }
    }
}

/// Fill, convert, clean and (optionally) augment one session.
pub fn session_series(
    session: &GazeSession,
    opts: &AssembleOptions,
    seed: u64,
) -> Result<Vec<ErrorSeries>> {
    let filled;
    let s = if session.has_missing() {
        filled = fill_missing(session)?;
        &filled
    } else {
        session
    };
    let errors = clean_errors(&compute_errors(s)?, opts.clean)?;
    if opts.augment {
        let set = augment_sample_with(&errors, seed, &opts.augment_params)?;
        Ok(set.variants.into_iter().map(|v| v.series).collect())
    } else {
        Ok(vec![errors])
    }
}

/// One row per (session, variant, category), grouped by class slot.
///
/// All sessions must share a platform. Sessions whose condition is not part
/// of the task are ignored. In the mixed task a participant contributing
/// both a Neutral and a UD60 session is rejected, since both would land in
/// the same class.
pub fn assemble_dataset(
    sessions: &[GazeSession],
    task: Task,
    opts: &AssembleOptions,
    seed: u64,
) -> Result<LabeledMatrix> {
    let platform = sessions
        .first()
        .ok_or_else(|| Error::data("no sessions to assemble"))?
        .meta
        .platform;
    if sessions.iter().any(|s| s.meta.platform != platform) {
        return Err(Error::data("sessions mix desktop and tablet platforms"));
    }
    let classes = task_classes(task, platform);

    // participant -> condition -> session index
    let mut by_participant: BTreeMap<&str, BTreeMap<Condition, usize>> = BTreeMap::new();
    for (i, s) in sessions.iter().enumerate() {
        let slot = by_participant
            .entry(s.meta.participant_id.as_str())
            .or_default();
        if slot.insert(s.meta.condition, i).is_some() {
            return Err(Error::data(format!(
                "participant {} has two {} sessions",
                s.meta.participant_id, s.meta.condition
            )));
        }
    }

    let mut picks: Vec<(usize, usize)> = Vec::new(); // (class, session)
    for (pid, conds) in &by_participant {
        for (label, (_, sources)) in classes.iter().enumerate() {
            let present: Vec<usize> = sources
                .iter()
                .filter_map(|c| conds.get(c).copied())
                .collect();
            if task == Task::Mixed && present.len() > 1 {
                return Err(Error::data(format!(
                    "participant {pid} has both Neutral and UD60 sessions; the mixed task includes neutral data once"
                )));
            }
            if let Some(&i) = present.first() {
                picks.push((label, i));
            }
        }
    }
    let mut seen = vec![false; classes.len()];
    for (l, _) in &picks {
        seen[*l] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::data(format!(
            "class {} has no sessions",
            classes[missing].0
        )));
    }
    picks.sort_by_key(|(l, i)| (*l, *i));

    let blocks: Vec<Vec<(Vec<f64>, usize, RowInfo)>> = picks
        .par_iter()
        .map(|&(label, i)| -> Result<Vec<(Vec<f64>, usize, RowInfo)>> {
            let s = &sessions[i];
            let series = session_series(s, opts, derive_seed(seed, i as u64))?;
            let mut rows = Vec::with_capacity(series.len() * 3);
            for e in &series {
                for cat in Category::ALL {
                    let f = build_feature_with(e, cat, opts.aoi_stat).map_err(|err| {
                        Error::data(format!(
                            "{} {}: {}",
                            s.meta.participant_id, s.meta.condition, err
                        ))
                    })?;
                    rows.push((
                        f.to_vec(),
                        label,
                        RowInfo {
                            participant: s.meta.participant_id.clone(),
                            category: Some(cat),
                        },
                    ));
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut m = LabeledMatrix {
        columns: feature_names(),
        class_names: classes.iter().map(|(n, _)| n.to_string()).collect(),
        ..LabeledMatrix::default()
    };
    for (row, label, info) in blocks.into_iter().flatten() {
        m.rows.push(row);
        m.labels.push(label);
        m.info.push(info);
    }
    Ok(m)
}

/// Row indices of a train/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits `total` items into groups proportional to `weights` with the
/// largest-remainder rule.
fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|a, b| {
        let ra = quotas[*a] - quotas[*a].floor();
        let rb = quotas[*b] - quotas[*b].floor();
        rb.total_cmp(&ra).then(a.cmp(b))
    });
    let assigned: usize = out.iter().sum();
    for k in order.into_iter().take(total.saturating_sub(assigned)) {
        out[k] += 1;
    }
    out
}

/// Stratified shuffle split; every class keeps at least one row on each side.
pub fn shuffle_split_indices(
    labels: &[usize],
    n_classes: usize,
    test_frac: f64,
    seed: u64,
) -> Result<SplitIndices> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::usage("test_frac must be in (0, 1)"));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, l) in labels.iter().enumerate() {
        by_class[*l].push(i);
    }
    let present: Vec<usize> = (0..n_classes)
        .filter(|c| !by_class[*c].is_empty())
        .collect();
    if let Some(c) = present.iter().find(|c| by_class[**c].len() < 2) {
        return Err(Error::data(format!(
            "class {c} has fewer than 2 rows, cannot split"
        )));
    }
    let n_test = (test_frac * labels.len() as f64).round() as usize;
    let weights: Vec<f64> = present.iter().map(|c| by_class[*c].len() as f64).collect();
    let alloc = largest_remainder(n_test, &weights);
    let mut r = rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, k) in present.iter().zip(alloc) {
        let mut idx = by_class[*c].clone();
        idx.shuffle(&mut r);
        let k = k.clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.shuffle(&mut r);
    test.shuffle(&mut r);
    Ok(SplitIndices { train, test })
}

pub fn shuffle_split(
    m: &LabeledMatrix,
    test_frac: f64,
    seed: u64,
) -> Result<(LabeledMatrix, LabeledMatrix)> {
    let s = shuffle_split_indices(&m.labels, m.n_classes(), test_frac, seed)?;
    Ok((m.subset(&s.train), m.subset(&s.test)))
}

/// Holds out whole participants: `round(test_frac * P)` of them, at least
/// one and at most `P - 1`.
pub fn participant_split_indices(
    m: &LabeledMatrix,
    test_frac: f64,
    seed: u64,
) -> Result<SplitIndices> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::usage("test_frac must be in (0, 1)"));
    }
    let mut people = m.participants();
    if people.len() < 2 {
        return Err(Error::data(
            "participant split needs at least 2 participants",
        ));
    }
    people.shuffle(&mut rng(seed));
    let k = ((test_frac * people.len() as f64).round() as usize).clamp(1, people.len() - 1);
    let held: BTreeSet<&str> = people[..k].iter().map(String::as_str).collect();
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..m.n_rows()).partition(|i| held.contains(m.info[*i].participant.as_str()));
    Ok(SplitIndices { train, test })
}

/// Writes feature columns, then `label`, `category` and `participant`.
pub fn write_matrix_csv(m: &LabeledMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = m.columns.clone();
    header.extend(["label", "category", "participant"].map(String::from));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, row) in m.rows.iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        rec.push(m.class_names[m.labels[i]].clone());
        rec.push(
            m.info[i]
                .category
                .map(|c| c.name().to_string())
                .unwrap_or_default(),
        );
        rec.push(m.info[i].participant.clone());
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::data(format!("{}: {other:?}", path.display())),
    }
}

/// Reads a matrix written by [`write_matrix_csv`]. `category` and
/// `participant` columns are optional; class ids follow first appearance
/// unless `class_order` is given.
pub fn read_matrix_csv(
    path: impl AsRef<Path>,
    class_order: Option<&[String]>,
) -> Result<LabeledMatrix> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let label_col = header
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::data(format!("{}: no 'label' column", path.display())))?;
    let cat_col = header.iter().position(|h| h == "category");
    let part_col = header.iter().position(|h| h == "participant");
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|j| *j != label_col && Some(*j) != cat_col && Some(*j) != part_col)
        .collect();
    let mut class_names: Vec<String> = class_order.map(<[String]>::to_vec).unwrap_or_default();
    let mut m = LabeledMatrix {
        columns: feature_cols.iter().map(|j| header[*j].clone()).collect(),
        ..LabeledMatrix::default()
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row_no = line + 2;
        let row = feature_cols
            .iter()
            .map(|j| {
                rec.get(*j)
                    .unwrap_or("")
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| {
                        Error::data(format!(
                            "{} row {row_no}: bad number in '{}'",
                            path.display(),
                            header[*j]
                        ))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let name = rec.get(label_col).unwrap_or("").trim().to_string();
        let label = match class_names.iter().position(|c| *c == name) {
            Some(l) => l,
            None if class_order.is_none() => {
                class_names.push(name);
                class_names.len() - 1
            }
            None => {
                return Err(Error::data(format!(
                    "{} row {row_no}: unknown class '{name}'",
                    path.display()
                )))
            }
        };
        let category = match cat_col.and_then(|j| rec.get(j)).map(str::trim) {
            Some(s) if !s.is_empty() => Some(s.parse::<Category>()?),
            _ => None,
        };
        m.rows.push(row);
        m.labels.push(label);
        m.info.push(RowInfo {
            participant: part_col
                .and_then(|j| rec.get(j))
                .unwrap_or("")
                .trim()
                .to_string(),
            category,
        });
    }
    m.class_names = class_names;
    m.validate()?;
    Ok(m)
}
