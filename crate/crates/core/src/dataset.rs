//! Gaze recording sessions: types, the canonical CSV format, AOI grids and
//! missing-value filling.
//!
//! A session file looks like:
//!
//! ```text
//! # participant_id=P01
//! # platform=desktop
//! # condition=UD60
//! # user_distance_mm=600
//! # screen_width_px=1680
//! # screen_height_px=1050
//! # screen_diagonal_mm=558.8
//! timestamp_ms,left_x,left_y,right_x,right_y,aoi_id,gt_x,gt_y
//! 0,171.2,104.9,169.0,106.1,1,168,105
//! ```
//!
//! Missing coordinates are empty fields or the literal `NaN`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const AOI_COUNT: usize = 15;
pub const AOI_COLUMNS: usize = 5;
pub const AOI_ROWS: usize = 3;
pub const DEFAULT_AOI_MARGIN: f64 = 0.1;

pub const CSV_COLUMNS: [&str; 8] = [
    "timestamp_ms",
    "left_x",
    "left_y",
    "right_x",
    "right_y",
    "aoi_id",
    "gt_x",
    "gt_y",
];

/// Tolerance used when checking that every record of one AOI carries the
/// same ground-truth point.
const GT_TOLERANCE_PX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

impl std::ops::Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenConfig {
    pub width_px: u32,
    pub height_px: u32,
    pub diagonal_mm: f64,
    /// Pixel pitch in mm per pixel.
    pub pixel_pitch_mm: f64,
    /// Raw coordinates are measured from this point (px). Top-left is `(0, 0)`.
    pub origin: Point,
}

impl ScreenConfig {
    /// Screen with a top-left origin and pixel pitch derived from the diagonal.
    pub fn from_diagonal(width_px: u32, height_px: u32, diagonal_mm: f64) -> Result<Self> {
        if width_px == 0 || height_px == 0 {
            return Err(Error::usage("screen dimensions must be positive"));
        }
        if !(diagonal_mm > 0.0) || !diagonal_mm.is_finite() {
            return Err(Error::usage(format!(
                "screen diagonal must be positive, got {diagonal_mm}"
            )));
        }
        let diag_px = (f64::from(width_px).powi(2) + f64::from(height_px).powi(2)).sqrt();
        Ok(ScreenConfig {
            width_px,
            height_px,
            diagonal_mm,
            pixel_pitch_mm: diagonal_mm / diag_px,
            origin: Point::new(0.0, 0.0),
        })
    }

    /// 22" 1680x1050 desktop monitor.
    pub fn desktop() -> Self {
        Self::from_diagonal(1680, 1050, 22.0 * 25.4).expect("valid constant screen")
    }

    /// 10.1" 1920x800 tablet display.
    pub fn tablet() -> Self {
        Self::from_diagonal(1920, 800, 10.1 * 25.4).expect("valid constant screen")
    }

    pub fn for_platform(platform: Platform) -> Self {
        match platform {
            Platform::Desktop => Self::desktop(),
            Platform::Tablet => Self::tablet(),
        }
    }

    pub fn with_origin(mut self, origin: Point) -> Self {
        self.origin = origin;
        self
    }

    /// Screen center in top-left pixel coordinates.
    pub fn center(&self) -> Point {
        Point::new(
            f64::from(self.width_px) / 2.0,
            f64::from(self.height_px) / 2.0,
        )
    }

    /// Re-expresses a raw coordinate relative to the screen center.
    pub fn to_centered(&self, raw: Point) -> Point {
        let c = self.center();
        Point::new(raw.x + self.origin.x - c.x, raw.y + self.origin.y - c.y)
    }

    /// Inverse of [`ScreenConfig::to_centered`].
    pub fn from_centered(&self, centered: Point) -> Point {
        let c = self.center();
        Point::new(
            centered.x + c.x - self.origin.x,
            centered.y + c.y - self.origin.y,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Platform {
    Desktop,
    Tablet,
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Platform::Desktop => "desktop",
            Platform::Tablet => "tablet",
        })
    }
}

impl FromStr for Platform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desktop" => Ok(Platform::Desktop),
            "tablet" => Ok(Platform::Tablet),
            other => Err(Error::data(format!("unknown platform '{other}'"))),
        }
    }
}

/// Operating condition under which a session was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    UD50,
    UD60,
    UD70,
    UD80,
    HeadRoll20,
    HeadPitch20,
    HeadYaw20,
    PlatRoll20,
    PlatPitch20,
    PlatYaw20,
    Neutral,
}

impl Condition {
    pub const ALL: [Condition; 11] = [
        Condition::UD50,
        Condition::UD60,
        Condition::UD70,
        Condition::UD80,
        Condition::HeadRoll20,
        Condition::HeadPitch20,
        Condition::HeadYaw20,
        Condition::PlatRoll20,
        Condition::PlatPitch20,
        Condition::PlatYaw20,
        Condition::Neutral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::UD50 => "UD50",
            Condition::UD60 => "UD60",
            Condition::UD70 => "UD70",
            Condition::UD80 => "UD80",
            Condition::HeadRoll20 => "HeadRoll20",
            Condition::HeadPitch20 => "HeadPitch20",
            Condition::HeadYaw20 => "HeadYaw20",
            Condition::PlatRoll20 => "PlatRoll20",
            Condition::PlatPitch20 => "PlatPitch20",
            Condition::PlatYaw20 => "PlatYaw20",
            Condition::Neutral => "Neutral",
        }
    }

    /// Nominal eye-to-tracker distance. Pose experiments were run at 60 cm.
    pub fn nominal_distance_mm(self) -> f64 {
        match self {
            Condition::UD50 => 500.0,
            Condition::UD70 => 700.0,
            Condition::UD80 => 800.0,
            _ => 600.0,
        }
    }

    pub fn is_user_distance(self) -> bool {
        matches!(
            self,
            Condition::UD50 | Condition::UD60 | Condition::UD70 | Condition::UD80
        )
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    /// Accepts the canonical names case-insensitively, ignoring `_` and `-`,
    /// so `head_roll20` and `HeadRoll20` are equivalent.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-' && !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase();
        let alias = match key.as_str() {
            "platformroll20" | "tabletroll20" => "platroll20",
            "platformpitch20" | "tabletpitch20" => "platpitch20",
            "platformyaw20" | "tabletyaw20" => "platyaw20",
            other => other,
        };
        Condition::ALL
            .iter()
            .copied()
            .find(|c| c.name().to_ascii_lowercase() == alias)
            .ok_or_else(|| Error::data(format!("unknown condition '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionMeta {
    pub participant_id: String,
    pub platform: Platform,
    pub condition: Condition,
    pub user_distance_mm: f64,
}

impl SessionMeta {
    pub fn new(
        participant_id: impl Into<String>,
        platform: Platform,
        condition: Condition,
    ) -> Self {
        SessionMeta {
            participant_id: participant_id.into(),
            platform,
            condition,
            user_distance_mm: condition.nominal_distance_mm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazeRecord {
    pub timestamp_ms: i64,
    pub left_x: Option<f64>,
    pub left_y: Option<f64>,
    pub right_x: Option<f64>,
    pub right_y: Option<f64>,
    /// 1-based AOI index, row-major over the 5x3 grid.
    pub aoi_id: u8,
    pub gt_x: f64,
    pub gt_y: f64,
}

impl GazeRecord {
    pub fn has_missing(&self) -> bool {
        self.left_x.is_none()
            || self.left_y.is_none()
            || self.right_x.is_none()
            || self.right_y.is_none()
    }

    pub fn missing_left(&self) -> bool {
        self.left_x.is_none() || self.left_y.is_none()
    }

    pub fn missing_right(&self) -> bool {
        self.right_x.is_none() || self.right_y.is_none()
    }
}

/// The four gaze coordinate channels of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    LeftX,
    LeftY,
    RightX,
    RightY,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::LeftX,
        Channel::LeftY,
        Channel::RightX,
        Channel::RightY,
    ];

    pub fn get(self, r: &GazeRecord) -> Option<f64> {
        match self {
            Channel::LeftX => r.left_x,
            Channel::LeftY => r.left_y,
            Channel::RightX => r.right_x,
            Channel::RightY => r.right_y,
        }
    }

    pub fn set(self, r: &mut GazeRecord, v: Option<f64>) {
        match self {
            Channel::LeftX => r.left_x = v,
            Channel::LeftY => r.left_y = v,
            Channel::RightX => r.right_x = v,
            Channel::RightY => r.right_y = v,
        }
    }

    pub fn name(self) -> &'static str {
        CSV_COLUMNS[1 + self as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazeSession {
    pub meta: SessionMeta,
    pub screen: ScreenConfig,
    pub records: Vec<GazeRecord>,
    /// 15 AOI points in raw screen coordinates, index `aoi_id - 1`.
    pub aoi_grid: Vec<Point>,
}

impl GazeSession {
    /// Builds a session and checks every invariant that [`load_session`]
    /// enforces on files.
    pub fn new(
        meta: SessionMeta,
        screen: ScreenConfig,
        records: Vec<GazeRecord>,
        aoi_grid: Vec<Point>,
    ) -> Result<Self> {
        let s = GazeSession {
            meta,
            screen,
            records,
            aoi_grid,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.aoi_grid.len() != AOI_COUNT {
            return Err(Error::data(format!(
                "AOI grid must have {AOI_COUNT} points, got {}",
                self.aoi_grid.len()
            )));
        }
        if !(self.meta.user_distance_mm > 0.0) {
            return Err(Error::data("user distance must be positive"));
        }
        let mut last_ts = i64::MIN;
        for (i, r) in self.records.iter().enumerate() {
            let row = i + 1;
            if r.aoi_id < 1 || usize::from(r.aoi_id) > AOI_COUNT {
                return Err(Error::data(format!(
                    "row {row}: aoi_id {} outside 1..={AOI_COUNT}",
                    r.aoi_id
                )));
            }
            if r.timestamp_ms < last_ts {
                return Err(Error::data(format!(
                    "row {row}: timestamp {} precedes previous {last_ts}",
                    r.timestamp_ms
                )));
            }
            last_ts = r.timestamp_ms;
            let g = self.aoi_grid[usize::from(r.aoi_id) - 1];
            if (g.x - r.gt_x).abs() > GT_TOLERANCE_PX || (g.y - r.gt_y).abs() > GT_TOLERANCE_PX {
                return Err(Error::data(format!(
                    "row {row}: ground truth ({}, {}) inconsistent with AOI {} at ({}, {})",
                    r.gt_x, r.gt_y, r.aoi_id, g.x, g.y
                )));
            }
        }
        Ok(())
    }

    pub fn has_missing(&self) -> bool {
        self.records.iter().any(GazeRecord::has_missing)
    }

    /// Contiguous runs of records sharing one AOI id, as index ranges.
    pub fn aoi_segments(&self) -> Vec<std::ops::Range<usize>> {
        aoi_segments(self.records.iter().map(|r| r.aoi_id))
    }
}

/// Splits a sequence of AOI ids into contiguous equal-id runs.
pub fn aoi_segments(ids: impl IntoIterator<Item = u8>) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut prev: Option<u8> = None;
    let mut n = 0;
    for (i, id) in ids.into_iter().enumerate() {
        if let Some(p) = prev {
            if p != id {
                out.push(start..i);
                start = i;
            }
        }
        prev = Some(id);
        n = i + 1;
    }
    if n > start {
        out.push(start..n);
    }
    out
}

/// Row-major 5x3 AOI grid. AOI 1 is top-left, AOI 8 the screen center,
/// AOI 15 bottom-right. Points are clamped to the pixel bounds.
pub fn make_aoi_grid(screen: &ScreenConfig, margin_frac: f64) -> Result<Vec<Point>> {
    if !(0.0..0.5).contains(&margin_frac) {
        return Err(Error::usage(format!(
            "AOI margin must be in [0, 0.5), got {margin_frac}"
        )));
    }
    let w = f64::from(screen.width_px);
    let h = f64::from(screen.height_px);
    let col_step = (1.0 - 2.0 * margin_frac) * w / (AOI_COLUMNS - 1) as f64;
    let row_step = (1.0 - 2.0 * margin_frac) * h / (AOI_ROWS - 1) as f64;
    let mut grid = Vec::with_capacity(AOI_COUNT);
    for row in 0..AOI_ROWS {
        for col in 0..AOI_COLUMNS {
            let x = (margin_frac * w + col as f64 * col_step).clamp(0.0, w - 1.0);
            let y = (margin_frac * h + row as f64 * row_step).clamp(0.0, h - 1.0);
            grid.push(Point::new(x, y));
        }
    }
    Ok(grid)
}

/// `(row, column)` of a 1-based AOI id, both 0-based.
pub fn aoi_row_col(aoi_id: u8) -> (usize, usize) {
    let i = usize::from(aoi_id) - 1;
    (i / AOI_COLUMNS, i % AOI_COLUMNS)
}

/// Metadata keys written to and read from session file headers.
const KEY_PARTICIPANT: &str = "participant_id";
const KEY_PLATFORM: &str = "platform";
const KEY_CONDITION: &str = "condition";
const KEY_DISTANCE: &str = "user_distance_mm";
const KEY_WIDTH: &str = "screen_width_px";
const KEY_HEIGHT: &str = "screen_height_px";
const KEY_DIAGONAL: &str = "screen_diagonal_mm";

/// Parsed `# key=value` header lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeaderMap(pub BTreeMap<String, String>);

impl HeaderMap {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::data(format!("missing header '# {key}=...'")))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.trim()
            .parse()
            .map_err(|_| Error::data(format!("header '{key}': cannot parse '{raw}'")))
    }

    pub fn meta(&self) -> Result<SessionMeta> {
        Ok(SessionMeta {
            participant_id: self.require(KEY_PARTICIPANT)?.to_string(),
            platform: self.require(KEY_PLATFORM)?.parse()?,
            condition: self.require(KEY_CONDITION)?.parse()?,
            user_distance_mm: self.parse(KEY_DISTANCE)?,
        })
    }

    pub fn screen(&self) -> Result<ScreenConfig> {
        ScreenConfig::from_diagonal(
            self.parse(KEY_WIDTH)?,
            self.parse(KEY_HEIGHT)?,
            self.parse(KEY_DIAGONAL)?,
        )
        .map_err(|e| Error::data(e.to_string()))
    }
}

/// Splits `text` into its leading comment header and the remaining body.
pub fn split_header(text: &str) -> Result<(HeaderMap, &str)> {
    let mut map = BTreeMap::new();
    let mut rest = text;
    while let Some(line) = rest.split_inclusive('\n').next() {
        let trimmed = line.trim();
        if !trimmed.starts_with('#') {
            break;
        }
        let body = trimmed.trim_start_matches('#').trim();
        if let Some((k, v)) = body.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        } else if !body.is_empty() {
            return Err(Error::data(format!("malformed header line '{trimmed}'")));
        }
        rest = &rest[line.len()..];
    }
    Ok((HeaderMap(map), rest))
}

fn parse_coord(field: &str, row: usize, col: &str) -> Result<Option<f64>> {
    let f = field.trim();
    if f.is_empty() || f.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    let v: f64 = f
        .parse()
        .map_err(|_| Error::data(format!("row {row}: column {col}: cannot parse '{f}'")))?;
    if !v.is_finite() {
        return Err(Error::data(format!(
            "row {row}: column {col}: non-finite value"
        )));
    }
    Ok(Some(v))
}

fn parse_required<T: FromStr>(field: &str, row: usize, col: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::data(format!("row {row}: column {col}: cannot parse '{field}'")))
}

/// Parses the record table (header row plus data rows).
pub fn parse_records(body: &str) -> Result<Vec<GazeRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::data(format!("header row: {e}")))?
        .clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != CSV_COLUMNS {
        return Err(Error::data(format!(
            "expected columns {}, got {}",
            CSV_COLUMNS.join(","),
            got.join(",")
        )));
    }
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::data(format!("row {row}: {e}")))?;
        if rec.len() != CSV_COLUMNS.len() {
            return Err(Error::data(format!(
                "row {row}: expected {} fields, got {}",
                CSV_COLUMNS.len(),
                rec.len()
            )));
        }
        let aoi_id: i64 = parse_required(&rec[5], row, "aoi_id")?;
        if aoi_id < 1 || aoi_id > AOI_COUNT as i64 {
            return Err(Error::data(format!(
                "row {row}: aoi_id {aoi_id} outside 1..={AOI_COUNT}"
            )));
        }
        let gt_x: f64 = parse_required(&rec[6], row, "gt_x")?;
        let gt_y: f64 = parse_required(&rec[7], row, "gt_y")?;
        if !gt_x.is_finite() || !gt_y.is_finite() {
            return Err(Error::data(format!("row {row}: non-finite ground truth")));
        }
        records.push(GazeRecord {
            timestamp_ms: parse_required(&rec[0], row, "timestamp_ms")?,
            left_x: parse_coord(&rec[1], row, "left_x")?,
            left_y: parse_coord(&rec[2], row, "left_y")?,
            right_x: parse_coord(&rec[3], row, "right_x")?,
            right_y: parse_coord(&rec[4], row, "right_y")?,
            aoi_id: aoi_id as u8,
            gt_x,
            gt_y,
        });
    }
    Ok(records)
}

/// AOI grid implied by the records' ground truth; AOIs never visited take
/// the default-margin grid position.
fn grid_from_records(records: &[GazeRecord], screen: &ScreenConfig) -> Result<Vec<Point>> {
    let mut grid = make_aoi_grid(screen, DEFAULT_AOI_MARGIN)?;
    let mut seen = [false; AOI_COUNT];
    for (i, r) in records.iter().enumerate() {
        let k = usize::from(r.aoi_id) - 1;
        if !seen[k] {
            grid[k] = Point::new(r.gt_x, r.gt_y);
            seen[k] = true;
        } else if (grid[k].x - r.gt_x).abs() > GT_TOLERANCE_PX
            || (grid[k].y - r.gt_y).abs() > GT_TOLERANCE_PX
        {
            return Err(Error::data(format!(
                "row {}: ground truth ({}, {}) differs from earlier AOI {} point ({}, {})",
                i + 1,
                r.gt_x,
                r.gt_y,
                r.aoi_id,
                grid[k].x,
                grid[k].y
            )));
        }
    }
    Ok(grid)
}

/// Parses a session from text. `screen` and `meta` override the header
/// values when given; otherwise the header must supply them.
pub fn parse_session(
    text: &str,
    screen: Option<ScreenConfig>,
    meta: Option<SessionMeta>,
) -> Result<GazeSession> {
    let (header, body) = split_header(text)?;
    let meta = match meta {
        Some(m) => m,
        None => header.meta()?,
    };
    let screen = match screen {
        Some(s) => s,
        None => header.screen()?,
    };
    let records = parse_records(body)?;
    let aoi_grid = grid_from_records(&records, &screen)?;
    GazeSession::new(meta, screen, records, aoi_grid)
}

/// Loads a canonical session CSV. Missing coordinates stay `None`.
pub fn load_session(
    path: impl AsRef<Path>,
    screen: Option<ScreenConfig>,
    meta: Option<SessionMeta>,
) -> Result<GazeSession> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_session(&text, screen, meta)
}

pub fn header_lines(meta: &SessionMeta, screen: &ScreenConfig) -> String {
    format!(
        "# {KEY_PARTICIPANT}={}\n# {KEY_PLATFORM}={}\n# {KEY_CONDITION}={}\n# {KEY_DISTANCE}={}\n# {KEY_WIDTH}={}\n# {KEY_HEIGHT}={}\n# {KEY_DIAGONAL}={}\n",
        meta.participant_id,
        meta.platform,
        meta.condition,
        meta.user_distance_mm,
        screen.width_px,
        screen.height_px,
        screen.diagonal_mm,
    )
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Canonical text form. Missing values are written as empty fields.
pub fn session_to_string(session: &GazeSession) -> String {
    let mut out = header_lines(&session.meta, &session.screen);
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for r in &session.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.timestamp_ms,
            fmt_opt(r.left_x),
            fmt_opt(r.left_y),
            fmt_opt(r.right_x),
            fmt_opt(r.right_y),
            r.aoi_id,
            r.gt_x,
            r.gt_y
        ));
    }
    out
}

pub fn save_session(session: &GazeSession, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, session_to_string(session)).map_err(|e| Error::io(path, e))
}

/// Replaces every missing coordinate with the mean of the present values of
/// the same channel within its AOI segment. A segment with no present value
/// for a channel falls back to the whole-session channel mean.
pub fn fill_missing(session: &GazeSession) -> Result<GazeSession> {
    let mut out = session.clone();
    if !session.has_missing() {
        return Ok(out);
    }
    let segments = session.aoi_segments();
    for ch in Channel::ALL {
        let present: Vec<f64> = session.records.iter().filter_map(|r| ch.get(r)).collect();
        if present.is_empty() {
            return Err(Error::data(format!(
                "channel {} has no values in the whole session",
                ch.name()
            )));
        }
        let session_mean = crate::stats::mean(&present);
        for seg in &segments {
            let vals: Vec<f64> = session.records[seg.clone()]
                .iter()
                .filter_map(|r| ch.get(r))
                .collect();
            let fill = if vals.is_empty() {
                session_mean
            } else {
                crate::stats::mean(&vals)
            };
            for r in &mut out.records[seg.clone()] {
                if ch.get(r).is_none() {
                    ch.set(r, Some(fill));
                }
            }
        }
    }
    Ok(out)
}
