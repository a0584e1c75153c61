//! Deterministic synthetic sessions with condition-dependent error fields.
//!
//! A session visits the 15 AOIs in order, dwelling a fixed number of samples
//! at each. Every sample's gaze point is the AOI ground truth displaced
//! radially by a target frontal error, then mapped back to pixels. The error
//! field is `a + b * (spatial_shape + jitter)`, with `a` and `b` solved so the
//! session's frontal errors hit the profile's mean and MAD.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::augment::PinkNoiseConfig;
use crate::dataset::{
    aoi_row_col, make_aoi_grid, Condition, GazeRecord, GazeSession, Platform, Point, ScreenConfig,
    SessionMeta, AOI_COUNT, DEFAULT_AOI_MARGIN,
};
use crate::error::{Error, Result};
use crate::geometry::{gt_angles, ErrorSeries};
use crate::seed::{derive_seed, rng};
use crate::stats;

/// How the error magnitude varies over the screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialMode {
    Uniform,
    /// Grows from the left edge to the right edge.
    YawSkewed,
    /// Grows from the top edge to the bottom edge.
    PitchSkewed,
    /// Grows with eccentricity from the screen center.
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionProfile {
    pub condition: Condition,
    /// Target mean frontal error (deg).
    pub mean_error: f64,
    /// Target median absolute deviation of the frontal error (deg).
    pub mad: f64,
    pub mode: SpatialMode,
}

/// Desktop mean/MAD per condition, from the published desktop statistics.
fn desktop_targets(c: Condition) -> (f64, f64) {
    match c {
        Condition::UD50 => (3.37, 3.49),
        Condition::UD60 | Condition::Neutral => (2.04, 1.77),
        Condition::UD70 => (1.21, 0.82),
        Condition::UD80 => (1.02, 0.66),
        Condition::HeadRoll20 | Condition::PlatRoll20 => (3.7, 3.63),
        Condition::HeadYaw20 | Condition::PlatYaw20 => (8.51, 10.0),
        Condition::HeadPitch20 | Condition::PlatPitch20 => (3.15, 1.90),
    }
}

/// Tablet mean/MAD per condition, from the published tablet statistics.
fn tablet_targets(c: Condition) -> (f64, f64) {
    match c {
        Condition::UD50 => (2.68, 0.38),
        Condition::UD60 | Condition::Neutral => (2.46, 0.42),
        Condition::UD70 => (0.59, 0.29),
        Condition::UD80 => (1.55, 0.24),
        Condition::PlatRoll20 | Condition::HeadRoll20 => (7.74, 0.77),
        Condition::PlatYaw20 | Condition::HeadYaw20 => (4.25, 0.60),
        Condition::PlatPitch20 | Condition::HeadPitch20 => (2.45, 0.46),
    }
}

fn default_mode(c: Condition) -> SpatialMode {
    match c {
        Condition::HeadRoll20 | Condition::PlatRoll20 => SpatialMode::Radial,
        Condition::HeadYaw20 | Condition::PlatYaw20 => SpatialMode::YawSkewed,
        Condition::HeadPitch20 | Condition::PlatPitch20 => SpatialMode::PitchSkewed,
        _ => SpatialMode::Uniform,
    }
}

impl ConditionProfile {
    pub fn new(condition: Condition, mean_error: f64, mad: f64, mode: SpatialMode) -> Result<Self> {
        if !(mean_error >= 0.0) || !(mad >= 0.0) {
            return Err(Error::usage("profile mean and MAD must be >= 0"));
        }
        Ok(ConditionProfile {
            condition,
            mean_error,
            mad,
            mode,
        })
    }

    pub fn calibrated(platform: Platform, condition: Condition) -> Self {
        let (mean_error, mad) = match platform {
            Platform::Desktop => desktop_targets(condition),
            Platform::Tablet => tablet_targets(condition),
        };
        ConditionProfile {
            condition,
            mean_error,
            mad,
            mode: default_mode(condition),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub samples_per_aoi: usize,
    pub sample_rate_hz: f64,
    /// Standard deviation of a random per-AOI offset added to the spatial
    /// shape, in the same units as the shape.
    pub aoi_spread: f64,
    /// Standard deviation of sample-to-sample jitter as a fraction of the
    /// target MAD.
    pub jitter_frac: f64,
    /// Share of the jitter variance that is pink (the rest is white).
    pub pink_share: f64,
    /// Height of the spatial shape.
    pub shape_gain: f64,
    /// Standard deviation of the horizontal vergence offset between eyes (px).
    pub vergence_px: f64,
    /// Probability that a sample loses one coordinate.
    pub missing_frac: f64,
    pub aoi_margin: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            samples_per_aoi: 41,
            sample_rate_hz: 30.0,
            aoi_spread: 0.3,
            jitter_frac: 0.15,
            pink_share: 0.5,
            shape_gain: 1.5,
            vergence_px: 3.0,
            missing_frac: 0.0,
            aoi_margin: DEFAULT_AOI_MARGIN,
        }
    }
}

const MAX_FRONTAL_DEG: f64 = 80.0;
const CALIBRATION_ROUNDS: usize = 8;

/// Frontal error actually realized when asking for `e` at an AOI whose
/// ground-truth frontal angle is `gt`: overshooting the center lands on the
/// opposite side.
fn realized(gt: f64, e: f64) -> (f64, bool) {
    let theta = gt + e;
    let flipped = theta < 0.0;
    let theta = theta.abs().min(MAX_FRONTAL_DEG);
    (theta - gt, flipped)
}

fn spatial_shape(mode: SpatialMode, k: usize, gt: &[crate::geometry::AngleSample]) -> f64 {
    let norm = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    let range = |f: fn(&crate::geometry::AngleSample) -> f64| {
        let v: Vec<f64> = gt.iter().map(f).collect();
        (
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    match mode {
        SpatialMode::Uniform => 0.0,
        SpatialMode::YawSkewed => {
            let (lo, hi) = range(|a| a.theta_yaw);
            norm(gt[k].theta_yaw, lo, hi)
        }
        SpatialMode::PitchSkewed => {
            let (lo, hi) = range(|a| a.theta_pitch);
            norm(gt[k].theta_pitch, lo, hi)
        }
        SpatialMode::Radial => {
            let (lo, hi) = range(|a| a.theta_gaze);
            norm(gt[k].theta_gaze, lo, hi)
        }
    }
}

/// Generates one session for `profile`. Bit-deterministic per seed.
pub fn synth_session(
    profile: &ConditionProfile,
    screen: &ScreenConfig,
    meta: &SessionMeta,
    seed: u64,
    opts: &SynthOptions,
) -> Result<GazeSession> {
    if !(profile.mean_error >= 0.0) || !(profile.mad >= 0.0) {
        return Err(Error::usage("profile mean and MAD must be >= 0"));
    }
    if opts.samples_per_aoi == 0 {
        return Err(Error::usage("samples_per_aoi must be positive"));
    }
    let z = meta.user_distance_mm;
    let grid = make_aoi_grid(screen, opts.aoi_margin)?;
    let centered: Vec<Point> = grid.iter().map(|p| screen.to_centered(*p)).collect();
    let gt: Vec<_> = centered
        .iter()
        .map(|p| gt_angles(*p, screen, z))
        .collect::<Result<_>>()?;

    let n = AOI_COUNT * opts.samples_per_aoi;
    let mut r = rng(seed);
    let pink = crate::augment::pink_noise_with(
        n.max(8),
        &PinkNoiseConfig {
            alpha: crate::augment::DEFAULT_PINK_ALPHA,
            sigma: 1.0,
            ..PinkNoiseConfig::default()
        },
        derive_seed(seed, 1),
    )?;
    let share = opts.pink_share.clamp(0.0, 1.0);
    let jitter_sd = opts.jitter_frac.max(0.0) * profile.mad;
    let (wp, ww) = (jitter_sd * share.sqrt(), jitter_sd * (1.0 - share).sqrt());
    // Skewed modes draw offsets along the axis orthogonal to the gradient so
    // the gradient itself stays monotone.
    let offsets: Vec<f64> = (0..AOI_COUNT)
        .map(|_| StandardNormal.sample(&mut r))
        .collect();
    let dwell: Vec<f64> = (0..AOI_COUNT)
        .map(|k| {
            let (row, col) = aoi_row_col((k + 1) as u8);
            let o = match profile.mode {
                SpatialMode::YawSkewed => offsets[row],
                SpatialMode::PitchSkewed => offsets[col],
                _ => offsets[k],
            };
            opts.shape_gain * spatial_shape(profile.mode, k, &gt) + opts.aoi_spread * o
        })
        .collect();

    let aoi_of = |i: usize| i / opts.samples_per_aoi;
    let field: Vec<f64> = (0..n).map(|i| dwell[aoi_of(i)]).collect();
    let jitter: Vec<f64> = (0..n)
        .map(|i| {
            let white: f64 = StandardNormal.sample(&mut r);
            wp * pink[i] + ww * white
        })
        .collect();
    let gt_frontal: Vec<f64> = (0..n).map(|i| gt[aoi_of(i)].theta_gaze).collect();

    // Solve e = a + b * field + jitter so the realized errors match the targets.
    let field_mad = stats::mad(&field);
    let (mut a, mut b) = if profile.mad == 0.0 || field_mad == 0.0 {
        (profile.mean_error, 0.0)
    } else {
        let b = profile.mad / field_mad;
        (profile.mean_error - b * stats::mean(&field), b)
    };
    for _ in 0..CALIBRATION_ROUNDS {
        let e: Vec<f64> = field
            .iter()
            .zip(&jitter)
            .zip(&gt_frontal)
            .map(|((f, j), g)| realized(*g, a + b * f + j).0)
            .collect();
        if profile.mad > 0.0 {
            let m = stats::mad(&e);
            if m > 0.0 && b > 0.0 {
                b *= profile.mad / m;
            }
        }
        let e: Vec<f64> = field
            .iter()
            .zip(&jitter)
            .zip(&gt_frontal)
            .map(|((f, j), g)| realized(*g, a + b * f + j).0)
            .collect();
        a += profile.mean_error - stats::mean(&e);
    }

    let vergence =
        Normal::new(0.0, opts.vergence_px.max(0.0)).map_err(|e| Error::usage(e.to_string()))?;
    let mu = screen.pixel_pitch_mm;
    // direction of the error at a target sitting exactly on the center
    let center_phi = r.random_range(0.0..std::f64::consts::TAU);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let k = aoi_of(i);
        let (e, flipped) = realized(gt_frontal[i], a + b * field[i] + jitter[i]);
        let theta = (gt_frontal[i] + e).to_radians();
        let c = centered[k];
        let mut phi = if c.x == 0.0 && c.y == 0.0 {
            center_phi
        } else {
            c.y.atan2(c.x)
        };
        if flipped {
            phi += std::f64::consts::PI;
        }
        let radius = z * theta.tan() / mu;
        let gaze = screen.from_centered(Point::new(radius * phi.cos(), radius * phi.sin()));
        let d: f64 = vergence.sample(&mut r);
        let mut rec = GazeRecord {
            timestamp_ms: (i as f64 * 1000.0 / opts.sample_rate_hz).round() as i64,
            left_x: Some(gaze.x + d),
            left_y: Some(gaze.y),
            right_x: Some(gaze.x - d),
            right_y: Some(gaze.y),
            aoi_id: (k + 1) as u8,
            gt_x: grid[k].x,
            gt_y: grid[k].y,
        };
        if opts.missing_frac > 0.0 && r.random::<f64>() < opts.missing_frac {
            match r.random_range(0..4) {
                0 => rec.left_x = None,
                1 => rec.left_y = None,
                2 => rec.right_x = None,
                _ => rec.right_y = None,
            }
        }
        records.push(rec);
    }
    GazeSession::new(meta.clone(), screen.clone(), records, grid)
}

/// One participant's set of sessions across conditions.
#[derive(Debug, Clone)]
pub struct CohortSpec {
    pub platform: Platform,
    pub conditions: Vec<Condition>,
    pub participants: usize,
    /// Relative between-participant spread of mean and MAD targets.
    pub spread: f64,
    pub options: SynthOptions,
}

impl CohortSpec {
    pub fn new(platform: Platform, conditions: Vec<Condition>, participants: usize) -> Self {
        CohortSpec {
            platform,
            conditions,
            participants,
            spread: 0.05,
            options: SynthOptions::default(),
        }
    }
}

pub fn participant_id(index: usize) -> String {
    format!("P{:02}", index + 1)
}

/// Sessions for every participant and condition, participant-major. Each
/// participant's targets are the calibrated profile scaled by
/// `1 + spread * N(0, 1)` (clamped at zero).
pub fn synth_cohort(spec: &CohortSpec, seed: u64) -> Result<Vec<GazeSession>> {
    let screen = ScreenConfig::for_platform(spec.platform);
    let mut out = Vec::with_capacity(spec.participants * spec.conditions.len());
    for p in 0..spec.participants {
        for (ci, cond) in spec.conditions.iter().enumerate() {
            let unit_seed = derive_seed(seed, (p * 64 + ci) as u64);
            let mut pr = rng(derive_seed(unit_seed, 7));
            let base = ConditionProfile::calibrated(spec.platform, *cond);
            let g1: f64 = StandardNormal.sample(&mut pr);
            let g2: f64 = StandardNormal.sample(&mut pr);
            let profile = ConditionProfile {
                mean_error: (base.mean_error * (1.0 + spec.spread * g1)).max(0.0),
                mad: (base.mad * (1.0 + spec.spread * g2)).max(0.0),
                ..base
            };
            let meta = SessionMeta::new(participant_id(p), spec.platform, *cond);
            out.push(synth_session(
                &profile,
                &screen,
                &meta,
                unit_seed,
                &spec.options,
            )?);
        }
    }
    Ok(out)
}

/// Adds `magnitude` to the frontal, yaw and pitch errors of a random
/// `frac` of the samples. Returns the spiked series and the spike indices.
pub fn inject_spikes(
    errors: &ErrorSeries,
    frac: f64,
    magnitude: f64,
    seed: u64,
) -> (ErrorSeries, Vec<usize>) {
    let mut r = rng(seed);
    let mut out = errors.clone();
    let count = (frac * errors.len() as f64).round() as usize;
    let idx = rand::seq::index::sample(&mut r, errors.len(), count.min(errors.len()));
    let mut spikes: Vec<usize> = idx.into_iter().collect();
    spikes.sort_unstable();
    for &i in &spikes {
        out.frontal_err[i] += magnitude;
        out.yaw_err[i] += magnitude;
        out.pitch_err[i] += magnitude;
    }
    (out, spikes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{describe, spatial_error_map};
    use crate::geometry::{aoi_gt_angles, compute_errors};

    fn ud60() -> (ConditionProfile, ScreenConfig, SessionMeta) {
        (
            ConditionProfile::calibrated(Platform::Desktop, Condition::UD60),
            ScreenConfig::desktop(),
            SessionMeta::new("P01", Platform::Desktop, Condition::UD60),
        )
    }

    #[test]
    fn zero_profile_gives_zero_errors() {
        let (_, screen, meta) = ud60();
        let p = ConditionProfile::new(Condition::UD60, 0.0, 0.0, SpatialMode::Radial).unwrap();
        let s = synth_session(&p, &screen, &meta, 4, &SynthOptions::default()).unwrap();
        let e = compute_errors(&s).unwrap();
        for v in e.frontal_err.iter().chain(&e.yaw_err).chain(&e.pitch_err) {
            assert!(v.abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (p, screen, meta) = ud60();
        let o = SynthOptions::default();
        assert_eq!(
            synth_session(&p, &screen, &meta, 9, &o).unwrap(),
            synth_session(&p, &screen, &meta, 9, &o).unwrap()
        );
        assert_ne!(
            synth_session(&p, &screen, &meta, 9, &o).unwrap(),
            synth_session(&p, &screen, &meta, 10, &o).unwrap()
        );
    }

    #[test]
    fn calibrated_statistics_hit_targets() {
        let (p, screen, meta) = ud60();
        for seed in 0..20 {
            let s = synth_session(&p, &screen, &meta, seed, &SynthOptions::default()).unwrap();
            let d = describe(&compute_errors(&s).unwrap().frontal_err).unwrap();
            assert!(
                (d.mean - 2.04).abs() <= 0.15 * 2.04,
                "seed {seed}: mean {}",
                d.mean
            );
            assert!(
                (d.mad - 1.77).abs() <= 0.15 * 1.77,
                "seed {seed}: mad {}",
                d.mad
            );
        }
    }

    #[test]
    fn yaw_skew_increases_left_to_right() {
        let (_, screen, meta) = ud60();
        let p =
            ConditionProfile::new(Condition::HeadYaw20, 3.0, 0.6, SpatialMode::YawSkewed).unwrap();
        let s = synth_session(&p, &screen, &meta, 2, &SynthOptions::default()).unwrap();
        let map =
            spatial_error_map(&compute_errors(&s).unwrap(), &aoi_gt_angles(&s).unwrap()).unwrap();
        let cols: Vec<f64> = map.column_means().into_iter().map(Option::unwrap).collect();
        for w in cols.windows(2) {
            assert!(w[1] > w[0], "{cols:?}");
        }
    }

    #[test]
    fn missing_fraction_produces_gaps() {
        let (p, screen, meta) = ud60();
        let o = SynthOptions {
            missing_frac: 0.1,
            ..SynthOptions::default()
        };
        let s = synth_session(&p, &screen, &meta, 1, &o).unwrap();
        let missing = s.records.iter().filter(|r| r.has_missing()).count();
        assert!(missing > 20 && missing < 120, "{missing}");
    }

    #[test]
    fn cohort_layout() {
        let spec = CohortSpec::new(
            Platform::Tablet,
            vec![Condition::UD50, Condition::PlatRoll20],
            3,
        );
        let c = synth_cohort(&spec, 5).unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c[3].meta.participant_id, "P02");
        assert_eq!(c[3].meta.condition, Condition::PlatRoll20);
        assert_eq!(c[0].records.len(), 15 * 41);
    }

    #[test]
    fn spikes_hit_requested_share() {
        let (p, screen, meta) = ud60();
        let s = synth_session(&p, &screen, &meta, 1, &SynthOptions::default()).unwrap();
        let e = compute_errors(&s).unwrap();
        let (spiked, idx) = inject_spikes(&e, 0.05, 10.0, 3);
        assert_eq!(idx.len(), (0.05 * e.len() as f64).round() as usize);
        for i in idx {
            assert!((spiked.frontal_err[i] - e.frontal_err[i] - 10.0).abs() < 1e-12);
        }
    }
}
