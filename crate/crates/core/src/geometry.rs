//! Pixel-space gaze and ground truth to frontal/yaw/pitch angles and
//! angular errors.
//!
//! All points handed to the angle functions are screen-center referenced
//! (see [`ScreenConfig::to_centered`]). Angles are returned in degrees.

use std::fmt;
use std::str::FromStr;

use crate::dataset::{GazeRecord, GazeSession, Point, ScreenConfig, AOI_COUNT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSample {
    pub theta_gaze: f64,
    pub theta_yaw: f64,
    pub theta_pitch: f64,
    pub timestamp_ms: i64,
}

/// One of the three error channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Frontal,
    Yaw,
    Pitch,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Frontal, Category::Yaw, Category::Pitch];

    pub fn name(self) -> &'static str {
        match self {
            Category::Frontal => "frontal",
            Category::Yaw => "yaw",
            Category::Pitch => "pitch",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "frontal" | "gaze" | "angle" => Ok(Category::Frontal),
            "yaw" => Ok(Category::Yaw),
            "pitch" => Ok(Category::Pitch),
            other => Err(Error::data(format!("unknown error category '{other}'"))),
        }
    }
}

/// Per-sample angular errors of one session, in degrees.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorSeries {
    pub frontal_err: Vec<f64>,
    pub yaw_err: Vec<f64>,
    pub pitch_err: Vec<f64>,
    pub aoi_ids: Vec<u8>,
    pub timestamps: Vec<i64>,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.frontal_err.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frontal_err.is_empty()
    }

    pub fn channel(&self, c: Category) -> &[f64] {
        match c {
            Category::Frontal => &self.frontal_err,
            Category::Yaw => &self.yaw_err,
            Category::Pitch => &self.pitch_err,
        }
    }

    pub fn channel_mut(&mut self, c: Category) -> &mut Vec<f64> {
        match c {
            Category::Frontal => &mut self.frontal_err,
            Category::Yaw => &mut self.yaw_err,
            Category::Pitch => &mut self.pitch_err,
        }
    }

    /// Applies `f` to each error channel, keeping ids and timestamps.
    pub fn map_channels(&self, mut f: impl FnMut(Category, &[f64]) -> Vec<f64>) -> ErrorSeries {
        ErrorSeries {
            frontal_err: f(Category::Frontal, &self.frontal_err),
            yaw_err: f(Category::Yaw, &self.yaw_err),
            pitch_err: f(Category::Pitch, &self.pitch_err),
            aoi_ids: self.aoi_ids.clone(),
            timestamps: self.timestamps.clone(),
        }
    }

    /// Keeps the samples where `keep[i]` is true.
    pub fn retain(&self, keep: &[bool]) -> ErrorSeries {
        let pick = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .zip(keep)
                .filter(|(_, k)| **k)
                .map(|(x, _)| *x)
                .collect()
        };
        ErrorSeries {
            frontal_err: pick(&self.frontal_err),
            yaw_err: pick(&self.yaw_err),
            pitch_err: pick(&self.pitch_err),
            aoi_ids: self
                .aoi_ids
                .iter()
                .zip(keep)
                .filter(|(_, k)| **k)
                .map(|(a, _)| *a)
                .collect(),
            timestamps: self
                .timestamps
                .iter()
                .zip(keep)
                .filter(|(_, k)| **k)
                .map(|(t, _)| *t)
                .collect(),
        }
    }

    pub fn check_consistent(&self) -> Result<()> {
        let n = self.frontal_err.len();
        if self.yaw_err.len() != n
            || self.pitch_err.len() != n
            || self.aoi_ids.len() != n
            || self.timestamps.len() != n
        {
            return Err(Error::data("error series columns have different lengths"));
        }
        Ok(())
    }

    /// Mean of `|error|` (or signed error) per AOI; `None` for AOIs without samples.
    pub fn per_aoi_mean(&self, c: Category, absolute: bool) -> [Option<f64>; AOI_COUNT] {
        let mut sum = [0.0; AOI_COUNT];
        let mut cnt = [0usize; AOI_COUNT];
        for (v, id) in self.channel(c).iter().zip(&self.aoi_ids) {
            let k = usize::from(*id) - 1;
            sum[k] += if absolute { v.abs() } else { *v };
            cnt[k] += 1;
        }
        std::array::from_fn(|k| (cnt[k] > 0).then(|| sum[k] / cnt[k] as f64))
    }
}

/// Per-sample binocular midpoint, re-expressed relative to the screen center.
pub fn binocular_average(record: &GazeRecord, screen: &ScreenConfig) -> Result<Point> {
    match (record.left_x, record.left_y, record.right_x, record.right_y) {
        (Some(lx), Some(ly), Some(rx), Some(ry)) => {
            Ok(screen.to_centered(Point::new((lx + rx) / 2.0, (ly + ry) / 2.0)))
        }
        _ => Err(Error::data(format!(
            "record at {} ms has missing eye data; fill missing values first",
            record.timestamp_ms
        ))),
    }
}

/// Frontal, yaw and pitch angles of a center-referenced point seen from
/// distance `z_mm`, with pixel pitch `pitch_mm` (mm/px).
pub fn angles_with_pitch(p: Point, pitch_mm: f64, z_mm: f64) -> Result<AngleSample> {
    if !(z_mm > 0.0) || !z_mm.is_finite() {
        return Err(Error::usage(format!(
            "viewing distance must be positive, got {z_mm}"
        )));
    }
    let osd = pitch_mm * p.x.hypot(p.y);
    Ok(AngleSample {
        theta_gaze: (osd / z_mm).atan().to_degrees(),
        theta_yaw: (pitch_mm * p.x / z_mm).atan().to_degrees(),
        theta_pitch: (pitch_mm * p.y / z_mm).atan().to_degrees(),
        timestamp_ms: 0,
    })
}

/// Gaze angles of a center-referenced gaze point.
pub fn to_angles(p: Point, screen: &ScreenConfig, z_mm: f64) -> Result<AngleSample> {
    angles_with_pitch(p, screen.pixel_pitch_mm, z_mm)
}

/// Ground-truth angles of a center-referenced AOI point.
pub fn gt_angles(aoi_point: Point, screen: &ScreenConfig, z_mm: f64) -> Result<AngleSample> {
    angles_with_pitch(aoi_point, screen.pixel_pitch_mm, z_mm)
}

/// Center-referenced point whose yaw/pitch angles are the given ones.
/// Inverse of the yaw/pitch part of [`to_angles`].
pub fn point_from_yaw_pitch(
    yaw_deg: f64,
    pitch_deg: f64,
    screen: &ScreenConfig,
    z_mm: f64,
) -> Point {
    let mu = screen.pixel_pitch_mm;
    Point::new(
        z_mm * yaw_deg.to_radians().tan() / mu,
        z_mm * pitch_deg.to_radians().tan() / mu,
    )
}

/// Ground-truth angles of the session's 15 AOIs, in AOI order.
pub fn aoi_gt_angles(session: &GazeSession) -> Result<Vec<AngleSample>> {
    session
        .aoi_grid
        .iter()
        .map(|p| {
            gt_angles(
                session.screen.to_centered(*p),
                &session.screen,
                session.meta.user_distance_mm,
            )
        })
        .collect()
}

/// Gaze and ground-truth angles per record.
pub fn session_angles(session: &GazeSession) -> Result<Vec<(AngleSample, AngleSample)>> {
    let z = session.meta.user_distance_mm;
    let screen = &session.screen;
    session
        .records
        .iter()
        .map(|r| {
            let g = binocular_average(r, screen)?;
            let mut gaze = to_angles(g, screen, z)?;
            let mut gt = gt_angles(screen.to_centered(Point::new(r.gt_x, r.gt_y)), screen, z)?;
            gaze.timestamp_ms = r.timestamp_ms;
            gt.timestamp_ms = r.timestamp_ms;
            Ok((gaze, gt))
        })
        .collect()
}

/// Frontal, yaw and pitch errors (estimate minus ground truth) per sample.
pub fn compute_errors(session: &GazeSession) -> Result<ErrorSeries> {
    if session.records.is_empty() {
        return Err(Error::data(format!(
            "session {}/{} has no records",
            session.meta.participant_id, session.meta.condition
        )));
    }
    let angles = session_angles(session)?;
    let n = angles.len();
    let mut out = ErrorSeries {
        frontal_err: Vec::with_capacity(n),
        yaw_err: Vec::with_capacity(n),
        pitch_err: Vec::with_capacity(n),
        aoi_ids: Vec::with_capacity(n),
        timestamps: Vec::with_capacity(n),
    };
    for ((gaze, gt), r) in angles.iter().zip(&session.records) {
        out.frontal_err.push(gaze.theta_gaze - gt.theta_gaze);
        out.yaw_err.push(gaze.theta_yaw - gt.theta_yaw);
        out.pitch_err.push(gaze.theta_pitch - gt.theta_pitch);
        out.aoi_ids.push(r.aoi_id);
        out.timestamps.push(r.timestamp_ms);
    }
    Ok(out)
}
