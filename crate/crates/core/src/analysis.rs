//! Outlier handling and statistical characterization of error series.

use std::fmt;
use std::str::FromStr;

use crate::dataset::{aoi_segments, Channel, GazeSession, AOI_COUNT};
use crate::error::{Error, Result};
use crate::geometry::{AngleSample, Category, ErrorSeries};
use crate::stats;

/// Kernel width equal to the mean number of samples per AOI dwell.
pub const DEFAULT_MEDIAN_KERNEL: usize = 41;
pub const DEFAULT_MAD_K: f64 = 3.0;
pub const DEFAULT_KDE_BANDWIDTH: f64 = 0.2;

/// Sliding median with replicate padding at both ends.
pub fn median_filter(x: &[f64], kernel_w: usize) -> Result<Vec<f64>> {
    if kernel_w == 0 || kernel_w % 2 == 0 {
        return Err(Error::usage(format!(
            "median kernel width must be odd and >= 1, got {kernel_w}"
        )));
    }
    if x.is_empty() {
        return Err(Error::usage("median filter needs at least one sample"));
    }
    let half = kernel_w / 2;
    let n = x.len() as isize;
    let at = |i: isize| x[i.clamp(0, n - 1) as usize];

    // Sorted window updated incrementally: drop the outgoing sample, insert
    // the incoming one.
    let mut window: Vec<f64> = (-(half as isize)..=half as isize).map(at).collect();
    window.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(x.len());
    for i in 0..n {
        out.push(window[half]);
        if i + 1 == n {
            break;
        }
        let outgoing = at(i - half as isize);
        let incoming = at(i + 1 + half as isize);
        let pos = window
            .binary_search_by(|v| v.total_cmp(&outgoing))
            .expect("outgoing sample is in the window");
        window.remove(pos);
        let ins = window.partition_point(|v| v.total_cmp(&incoming).is_lt());
        window.insert(ins, incoming);
    }
    Ok(out)
}

/// Sliding median whose window is truncated at both ends instead of padded,
/// so an end sample is never outvoted by copies of itself. Even-length
/// windows take the mean of the two middle values.
pub fn median_filter_truncated(x: &[f64], kernel_w: usize) -> Result<Vec<f64>> {
    if kernel_w == 0 || kernel_w % 2 == 0 {
        return Err(Error::usage(format!(
            "median kernel width must be odd and >= 1, got {kernel_w}"
        )));
    }
    if x.is_empty() {
        return Err(Error::usage("median filter needs at least one sample"));
    }
    let half = kernel_w / 2;
    let n = x.len();
    let mut window = Vec::with_capacity(kernel_w);
    Ok((0..n)
        .map(|i| {
            window.clear();
            window.extend_from_slice(&x[i.saturating_sub(half)..(i + half + 1).min(n)]);
            window.sort_by(f64::total_cmp);
            let m = window.len();
            if m % 2 == 1 {
                window[m / 2]
            } else {
                (window[m / 2 - 1] + window[m / 2]) / 2.0
            }
        })
        .collect())
}

/// Flags `|x_i - median| > k * MAD`. With a zero MAD the IQR fence rule is
/// used instead.
pub fn mad_outliers(x: &[f64], k: f64) -> Result<Vec<bool>> {
    if x.len() < 3 {
        return Err(Error::usage(
            "MAD outlier detection needs at least 3 samples",
        ));
    }
    let med = stats::median(x);
    let mad = stats::mad(x);
    if mad == 0.0 {
        return Ok(iqr_fence(x));
    }
    Ok(x.iter().map(|v| (v - med).abs() > k * mad).collect())
}

fn iqr_fence(x: &[f64]) -> Vec<bool> {
    let (q1, q3) = stats::quartiles(x);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    x.iter().map(|v| *v < lo || *v > hi).collect()
}

/// Flags values outside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`.
pub fn iqr_outliers(x: &[f64]) -> Result<Vec<bool>> {
    if x.len() < 4 {
        return Err(Error::usage(
            "IQR outlier detection needs at least 4 samples",
        ));
    }
    Ok(iqr_fence(x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptiveStats {
    pub mean: f64,
    pub mad: f64,
    pub iqr: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub n: usize,
    /// Sample standard deviation, used for the interval.
    pub sd: f64,
}

/// Mean, MAD, IQR and the normal-approximation 95% interval of the mean.
pub fn describe(x: &[f64]) -> Result<DescriptiveStats> {
    if x.len() < 2 {
        return Err(Error::usage("describe needs at least 2 samples"));
    }
    let mean = stats::mean(x);
    let sd = stats::sample_sd(x);
    let half = 1.96 * sd / (x.len() as f64).sqrt();
    Ok(DescriptiveStats {
        mean,
        mad: stats::mad(x),
        iqr: stats::iqr(x),
        ci95_low: mean - half,
        ci95_high: mean + half,
        n: x.len(),
        sd,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeCurve {
    pub eval_points: Vec<f64>,
    pub densities: Vec<f64>,
    pub bandwidth_h: f64,
}

impl KdeCurve {
    /// Trapezoidal integral of the density over the evaluation grid.
    pub fn integral(&self) -> f64 {
        self.eval_points
            .windows(2)
            .zip(self.densities.windows(2))
            .map(|(x, d)| (x[1] - x[0]) * (d[0] + d[1]) / 2.0)
            .sum()
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn gaussian_kernel(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

/// Gaussian kernel density estimate `(1/(n h)) sum K((y - x_i)/h)`.
pub fn kde(x: &[f64], h: f64, eval_points: &[f64]) -> Result<KdeCurve> {
    if !(h > 0.0) {
        return Err(Error::usage(format!(
            "KDE bandwidth must be positive, got {h}"
        )));
    }
    if x.is_empty() {
        return Err(Error::usage("KDE needs at least one sample"));
    }
    let norm = 1.0 / (x.len() as f64 * h);
    let densities = eval_points
        .iter()
        .map(|y| {
            norm * x
                .iter()
                .map(|xi| gaussian_kernel((y - xi) / h))
                .sum::<f64>()
        })
        .collect();
    Ok(KdeCurve {
        eval_points: eval_points.to_vec(),
        densities,
        bandwidth_h: h,
    })
}

/// Evenly spaced grid covering `[min(x) - 4h, max(x) + 4h]`.
pub fn kde_grid(x: &[f64], h: f64, points: usize) -> Vec<f64> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * h;
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * h;
    let points = points.max(2);
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + i as f64 * step).collect()
}

/// Pearson correlation; `None` when either vector has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let ma = stats::mean(a);
    let mb = stats::mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

/// Pairwise Pearson correlation of equal-length vectors.
pub fn pearson_matrix(names: Vec<String>, vectors: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    if vectors.len() < 2 {
        return Err(Error::usage("correlation needs at least two series"));
    }
    let len = vectors[0].len();
    if vectors.iter().any(|v| v.len() != len) {
        return Err(Error::usage("correlation vectors must share one length"));
    }
    let n = vectors.len();
    let mut values = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let r = pearson(&vectors[i], &vectors[j]).map(|r| if i == j { 1.0 } else { r });
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { names, values })
}

/// Correlates error series through their per-AOI signed mean 15-vectors.
pub fn correlation_matrix(
    series: &[(String, &ErrorSeries)],
    category: Category,
) -> Result<CorrelationMatrix> {
    let mut vectors = Vec::with_capacity(series.len());
    for (name, s) in series {
        let v = s
            .per_aoi_mean(category, false)
            .iter()
            .enumerate()
            .map(|(k, m)| {
                m.ok_or_else(|| Error::data(format!("{name}: AOI {} has no samples", k + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        vectors.push(v);
    }
    pearson_matrix(series.iter().map(|(n, _)| n.clone()).collect(), &vectors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCell {
    pub aoi_id: u8,
    pub gt_yaw: f64,
    pub gt_pitch: f64,
    /// Mean `|frontal error|`; `None` when the AOI has no samples.
    pub value: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialErrorMap {
    pub cells: Vec<SpatialCell>,
}

impl SpatialErrorMap {
    /// Mean cell value per grid column (left to right), over present cells.
    pub fn column_means(&self) -> Vec<Option<f64>> {
        (0..crate::dataset::AOI_COLUMNS)
            .map(|c| {
                let v: Vec<f64> = self
                    .cells
                    .iter()
                    .filter(|cell| crate::dataset::aoi_row_col(cell.aoi_id).1 == c)
                    .filter_map(|cell| cell.value)
                    .collect();
                (!v.is_empty()).then(|| stats::mean(&v))
            })
            .collect()
    }

    /// Mean cell value per grid row (top to bottom), over present cells.
    pub fn row_means(&self) -> Vec<Option<f64>> {
        (0..crate::dataset::AOI_ROWS)
            .map(|r| {
                let v: Vec<f64> = self
                    .cells
                    .iter()
                    .filter(|cell| crate::dataset::aoi_row_col(cell.aoi_id).0 == r)
                    .filter_map(|cell| cell.value)
                    .collect();
                (!v.is_empty()).then(|| stats::mean(&v))
            })
            .collect()
    }
}

/// Per-AOI mean `|frontal error|` keyed by the AOI's ground-truth yaw/pitch.
pub fn spatial_error_map(
    errors: &ErrorSeries,
    gt_angles: &[AngleSample],
) -> Result<SpatialErrorMap> {
    if gt_angles.len() != AOI_COUNT {
        return Err(Error::usage(format!(
            "expected {AOI_COUNT} AOI ground-truth angles, got {}",
            gt_angles.len()
        )));
    }
    errors.check_consistent()?;
    let means = errors.per_aoi_mean(Category::Frontal, true);
    let mut counts = [0usize; AOI_COUNT];
    for id in &errors.aoi_ids {
        counts[usize::from(*id) - 1] += 1;
    }
    let cells = (0..AOI_COUNT)
        .map(|k| SpatialCell {
            aoi_id: (k + 1) as u8,
            gt_yaw: gt_angles[k].theta_yaw,
            gt_pitch: gt_angles[k].theta_pitch,
            value: means[k],
            count: counts[k],
        })
        .collect();
    Ok(SpatialErrorMap { cells })
}

/// Outlier handling applied before statistics and features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CleanMethod {
    /// Replace values by the windowed median within each AOI segment. The
    /// window is truncated at segment ends.
    Median {
        kernel: usize,
    },
    /// Drop samples beyond `k * MAD` from the segment median.
    Mad {
        k: f64,
    },
    /// Drop samples outside the 1.5 IQR fences of their segment.
    Iqr,
    None,
}

impl Default for CleanMethod {
    fn default() -> Self {
        CleanMethod::Median {
            kernel: DEFAULT_MEDIAN_KERNEL,
        }
    }
}

impl fmt::Display for CleanMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CleanMethod::Median { kernel } => write!(f, "median(kernel={kernel})"),
            CleanMethod::Mad { k } => write!(f, "mad(k={k})"),
            CleanMethod::Iqr => f.write_str("iqr"),
            CleanMethod::None => f.write_str("none"),
        }
    }
}

impl CleanMethod {
    /// Parses `median`, `mad`, `iqr` or `none` with the given parameters.
    pub fn from_parts(name: &str, kernel: usize, k: f64) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "median" => Ok(CleanMethod::Median { kernel }),
            "mad" => Ok(CleanMethod::Mad { k }),
            "iqr" => Ok(CleanMethod::Iqr),
            "none" => Ok(CleanMethod::None),
            other => Err(Error::usage(format!("unknown cleaning method '{other}'"))),
        }
    }
}

impl FromStr for CleanMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CleanMethod::from_parts(s, DEFAULT_MEDIAN_KERNEL, DEFAULT_MAD_K)
    }
}

/// Applies a cleaning method to several aligned channels split into
/// segments. Returns replaced channel values and the keep-mask.
fn clean_channels(
    channels: &[Vec<f64>],
    segments: &[std::ops::Range<usize>],
    method: CleanMethod,
) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let n = channels.first().map_or(0, Vec::len);
    let mut out = channels.to_vec();
    let mut keep = vec![true; n];
    for seg in segments {
        for (c, ch) in channels.iter().enumerate() {
            let vals = &ch[seg.clone()];
            match method {
                CleanMethod::Median { kernel } => {
                    out[c][seg.clone()].copy_from_slice(&median_filter_truncated(vals, kernel)?);
                }
                CleanMethod::Mad { k } if vals.len() >= 3 => {
                    for (i, flag) in mad_outliers(vals, k)?.into_iter().enumerate() {
                        keep[seg.start + i] &= !flag;
                    }
                }
                CleanMethod::Iqr if vals.len() >= 4 => {
                    for (i, flag) in iqr_outliers(vals)?.into_iter().enumerate() {
                        keep[seg.start + i] &= !flag;
                    }
                }
                _ => {}
            }
        }
    }
    Ok((out, keep))
}

/// Cleans an error series segment by segment (contiguous AOI runs). Median
/// filtering replaces values; MAD/IQR remove samples flagged in any channel.
pub fn clean_errors(errors: &ErrorSeries, method: CleanMethod) -> Result<ErrorSeries> {
    errors.check_consistent()?;
    let segments = aoi_segments(errors.aoi_ids.iter().copied());
    let channels: Vec<Vec<f64>> = Category::ALL
        .iter()
        .map(|c| errors.channel(*c).to_vec())
        .collect();
    let (mut replaced, keep) = clean_channels(&channels, &segments, method)?;
    let mut out = errors.clone();
    out.pitch_err = replaced.pop().expect("three channels");
    out.yaw_err = replaced.pop().expect("three channels");
    out.frontal_err = replaced.pop().expect("three channels");
    Ok(out.retain(&keep))
}

/// Cleans the raw gaze coordinates of a session (missing values must have
/// been filled). Median filtering replaces pixel values; MAD/IQR drop records.
pub fn clean_session(session: &GazeSession, method: CleanMethod) -> Result<GazeSession> {
    if session.has_missing() {
        return Err(Error::data(
            "session has missing values; fill them before cleaning",
        ));
    }
    let segments = session.aoi_segments();
    let channels: Vec<Vec<f64>> = Channel::ALL
        .iter()
        .map(|ch| {
            session
                .records
                .iter()
                .map(|r| ch.get(r).expect("filled"))
                .collect()
        })
        .collect();
    let (replaced, keep) = clean_channels(&channels, &segments, method)?;
    let mut out = session.clone();
    for (c, ch) in Channel::ALL.iter().enumerate() {
        for (r, v) in out.records.iter_mut().zip(&replaced[c]) {
            ch.set(r, Some(*v));
        }
    }
    out.records = out
        .records
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn truncated_window_keeps_end_spikes_out() {
        let mut x = vec![1.0; 41];
        x[40] = 11.0;
        assert_eq!(median_filter(&x, 41).unwrap()[40], 11.0);
        assert_eq!(median_filter_truncated(&x, 41).unwrap()[40], 1.0);
        assert_eq!(
            median_filter_truncated(&[1.0, 3.0], 3).unwrap(),
            vec![2.0, 2.0]
        );
    }

    fn naive_median_filter(x: &[f64], w: usize) -> Vec<f64> {
        let h = (w / 2) as isize;
        let n = x.len() as isize;
        (0..n)
            .map(|i| {
                let mut win: Vec<f64> = (i - h..=i + h)
                    .map(|j| x[j.clamp(0, n - 1) as usize])
                    .collect();
                win.sort_by(|a, b| a.partial_cmp(b).unwrap());
                win[win.len() / 2]
            })
            .collect()
    }

    #[test]
    fn median_hand_example() {
        let y = median_filter(&[1.0, 9.0, 2.0, 3.0, 100.0, 4.0], 3).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0, 3.0, 4.0, 4.0]);
    }

    #[test]
    fn median_constant_unchanged() {
        let x = vec![2.5; 17];
        assert_eq!(median_filter(&x, 41).unwrap(), x);
    }

    #[test]
    fn median_rejects_even_kernel() {
        assert!(matches!(
            median_filter(&[1.0, 2.0], 4),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            median_filter(&[1.0, 2.0], 0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn median_matches_naive_oracle() {
        let mut rng = crate::seed::rng(11);
        for _ in 0..50 {
            let n = rng.random_range(1..120);
            let w = 2 * rng.random_range(0..12) + 1;
            let x: Vec<f64> = (0..n)
                .map(|_| rng.random_range(-5.0..5.0f64).round())
                .collect();
            assert_eq!(median_filter(&x, w).unwrap(), naive_median_filter(&x, w));
        }
    }

    #[test]
    fn median_idempotent_on_wide_plateaus() {
        let mut x = vec![1.0; 50];
        x.extend(vec![4.0; 50]);
        x.extend(vec![-2.0; 50]);
        let once = median_filter(&x, 41).unwrap();
        assert_eq!(median_filter(&once, 41).unwrap(), once);
    }

    #[test]
    fn mad_hand_example() {
        let m = mad_outliers(&[2.0, 4.0, 6.0, 8.0, 100.0], 3.0).unwrap();
        assert_eq!(m, vec![false, false, false, false, true]);
    }

    #[test]
    fn mad_all_equal_flags_nothing() {
        assert!(mad_outliers(&[3.0; 9], 3.0).unwrap().iter().all(|f| !f));
    }

    #[test]
    fn mad_symmetric_without_outliers() {
        let x: Vec<f64> = (-10..=10).map(f64::from).collect();
        assert!(mad_outliers(&x, 3.0).unwrap().iter().all(|f| !f));
    }

    #[test]
    fn mad_zero_falls_back_to_iqr() {
        // More than half identical: MAD is 0, the IQR fence still catches 50.
        let x = [1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 50.0];
        let m = mad_outliers(&x, 3.0).unwrap();
        assert_eq!(m, iqr_outliers(&x).unwrap());
        assert!(m[6]);
    }

    #[test]
    fn iqr_hand_example() {
        let x: Vec<f64> = (1..=9).map(f64::from).chain([100.0]).collect();
        let m = iqr_outliers(&x).unwrap();
        assert_eq!(m.iter().filter(|f| **f).count(), 1);
        assert!(m[9]);
        let ramp: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!(iqr_outliers(&ramp).unwrap().iter().all(|f| !f));
    }

    #[test]
    fn removing_spikes_shrinks_iqr() {
        let mut x: Vec<f64> = (0..40).map(|i| (f64::from(i) * 0.7).sin()).collect();
        x.extend([30.0, -25.0, 40.0]);
        let mask = iqr_outliers(&x).unwrap();
        let kept: Vec<f64> = x
            .iter()
            .zip(&mask)
            .filter(|(_, f)| !**f)
            .map(|(v, _)| *v)
            .collect();
        assert_eq!(kept.len(), 40);
        assert!(stats::iqr(&kept) <= stats::iqr(&x));
    }

    #[test]
    fn describe_constant() {
        let d = describe(&[4.25; 10]).unwrap();
        assert_eq!((d.mean, d.mad, d.iqr), (4.25, 0.0, 0.0));
        assert_eq!((d.ci95_low, d.ci95_high), (4.25, 4.25));
    }

    #[test]
    fn describe_needs_two() {
        assert!(describe(&[1.0]).is_err());
    }

    #[test]
    fn kde_single_point_closed_form() {
        let c = kde(&[0.0], 0.2, &[0.0]).unwrap();
        assert!((c.densities[0] - 1.0 / (0.2 * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-12);
        assert!((c.densities[0] - 1.9947).abs() < 1e-4);
    }

    #[test]
    fn kde_tails_vanish_and_integrate() {
        let x = [0.1, 0.5, 1.7, 2.2];
        let far = kde(&x, 0.2, &[50.0]).unwrap();
        assert!(far.densities[0] < 1e-100);
        let c = kde(&x, 0.2, &kde_grid(&x, 0.2, 2000)).unwrap();
        assert!((c.integral() - 1.0).abs() < 0.02);
    }

    #[test]
    fn correlation_self_and_negation() {
        let v: Vec<f64> = (0..15).map(|i| (i as f64).sin()).collect();
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let flat = vec![1.0; 15];
        let m = pearson_matrix(
            vec!["a".into(), "b".into(), "c".into()],
            &[v.clone(), neg, flat],
        )
        .unwrap();
        assert_eq!(m.values[0][0], Some(1.0));
        assert!((m.values[0][1].unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(m.values[0][2], None);
        assert_eq!(m.values[2][2], None);
    }

    #[test]
    fn correlation_matches_direct_formula() {
        let mut rng = crate::seed::rng(3);
        let vs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..15).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let m = pearson_matrix((0..4).map(|i| i.to_string()).collect(), &vs).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let (a, b) = (&vs[i], &vs[j]);
                let n = a.len() as f64;
                let ma = a.iter().sum::<f64>() / n;
                let mb = b.iter().sum::<f64>() / n;
                let cov = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - ma) * (y - mb))
                    .sum::<f64>()
                    / n;
                let sa = (a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n).sqrt();
                let sb = (b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n).sqrt();
                assert!((m.values[i][j].unwrap() - cov / (sa * sb)).abs() < 1e-12);
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
    }

    fn series_with(values: impl Fn(u8) -> f64, per_aoi: usize) -> ErrorSeries {
        let mut s = ErrorSeries::default();
        for id in 1..=15u8 {
            for k in 0..per_aoi {
                s.frontal_err.push(values(id));
                s.yaw_err.push(values(id) / 2.0);
                s.pitch_err.push(-values(id));
                s.aoi_ids.push(id);
                s.timestamps.push((usize::from(id) * 100 + k) as i64);
            }
        }
        s
    }

    fn zero_angles() -> Vec<AngleSample> {
        (0..15)
            .map(|k| AngleSample {
                theta_gaze: 0.0,
                theta_yaw: k as f64,
                theta_pitch: -(k as f64),
                timestamp_ms: 0,
            })
            .collect()
    }

    #[test]
    fn spatial_map_uniform_and_indicator() {
        let m = spatial_error_map(&series_with(|_| 1.0, 5), &zero_angles()).unwrap();
        assert!(m.cells.iter().all(|c| c.value == Some(1.0) && c.count == 5));
        let m = spatial_error_map(
            &series_with(|id| if id == 1 { -2.0 } else { 0.0 }, 3),
            &zero_angles(),
        )
        .unwrap();
        let nonzero: Vec<_> = m.cells.iter().filter(|c| c.value != Some(0.0)).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].aoi_id, 1);
        assert_eq!(nonzero[0].value, Some(2.0));
    }

    #[test]
    fn spatial_map_missing_cell_and_groupby_oracle() {
        let mut rng = crate::seed::rng(5);
        let mut s = ErrorSeries::default();
        for i in 0..300 {
            let id = rng.random_range(1..=14u8);
            s.frontal_err.push(rng.random_range(-4.0..4.0));
            s.yaw_err.push(0.0);
            s.pitch_err.push(0.0);
            s.aoi_ids.push(id);
            s.timestamps.push(i);
        }
        let m = spatial_error_map(&s, &zero_angles()).unwrap();
        for id in 1..=14u8 {
            let vals: Vec<f64> = s
                .frontal_err
                .iter()
                .zip(&s.aoi_ids)
                .filter(|(_, a)| **a == id)
                .map(|(v, _)| v.abs())
                .collect();
            let expect = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((m.cells[usize::from(id) - 1].value.unwrap() - expect).abs() < 1e-12);
        }
        assert_eq!(m.cells[14].value, None);
        assert_eq!(m.cells[14].count, 0);
    }

    #[test]
    fn clean_errors_median_replaces_spike_within_segment() {
        let mut s = series_with(|id| f64::from(id), 9);
        s.frontal_err[4] = 99.0;
        let c = clean_errors(&s, CleanMethod::Median { kernel: 5 }).unwrap();
        assert_eq!(c.len(), s.len());
        assert_eq!(c.frontal_err[4], 1.0);
        // Segment boundaries are respected: AOI 2 values stay 2.0.
        assert!(c.frontal_err[9..18].iter().all(|v| *v == 2.0));
    }

    #[test]
    fn clean_errors_iqr_drops_rows() {
        let mut s = series_with(|id| f64::from(id), 9);
        for (i, v) in s.frontal_err.iter_mut().enumerate() {
            *v += (i % 3) as f64 * 0.1;
        }
        s.yaw_err[3] = 500.0;
        let c = clean_errors(&s, CleanMethod::Iqr).unwrap();
        assert_eq!(c.len(), s.len() - 1);
        c.check_consistent().unwrap();
    }

    proptest! {
        #[test]
        fn describe_shift_equivariance(
            x in proptest::collection::vec(-10.0f64..10.0, 2..60),
            c in -100.0f64..100.0,
        ) {
            let a = describe(&x).unwrap();
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let b = describe(&shifted).unwrap();
            prop_assert!((b.mean - a.mean - c).abs() < 1e-9);
            prop_assert!((b.ci95_low - a.ci95_low - c).abs() < 1e-9);
            prop_assert!((b.ci95_high - a.ci95_high - c).abs() < 1e-9);
            prop_assert!((b.mad - a.mad).abs() < 1e-9);
            prop_assert!((b.iqr - a.iqr).abs() < 1e-9);
            prop_assert!(a.ci95_low <= a.mean && a.mean <= a.ci95_high);
        }

        // Removing flagged points does not always shrink an interpolated IQR
        // (quantile positions move when one tail is trimmed), but every kept
        // point lies inside the original fences.
        #[test]
        fn kept_points_lie_within_fences(
            x in proptest::collection::vec(-50.0f64..50.0, 4..80),
        ) {
            let mask = iqr_outliers(&x).unwrap();
            let (q1, q3) = stats::quartiles(&x);
            let iqr = q3 - q1;
            for (v, f) in x.iter().zip(&mask) {
                prop_assert_eq!(*f, *v < q1 - 1.5 * iqr || *v > q3 + 1.5 * iqr);
            }
        }

        #[test]
        fn kde_permutation_invariant(
            mut x in proptest::collection::vec(-5.0f64..5.0, 1..30),
            y in -6.0f64..6.0,
        ) {
            let a = kde(&x, 0.2, &[y]).unwrap().densities[0];
            x.reverse();
            let b = kde(&x, 0.2, &[y]).unwrap().densities[0];
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }
}
