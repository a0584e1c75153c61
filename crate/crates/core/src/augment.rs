//! Ten-fold augmentation of error series.
//!
//! Each cleaned [`ErrorSeries`] yields ten variants: Gaussian noise, pink
//! jitter, linear interpolation, raised-cosine smoothing, circular time
//! shift, three combinations, and horizontal/vertical AOI flips.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dataset::{
    header_lines, split_header, HeaderMap, ScreenConfig, SessionMeta, AOI_COLUMNS, AOI_COUNT,
    AOI_ROWS,
};
use crate::error::{Error, Result};
use crate::geometry::ErrorSeries;
use crate::seed;

pub const VARIANTS_PER_SAMPLE: usize = 10;
pub const DEFAULT_NOISE_SIGMA: f64 = 0.2;
pub const DEFAULT_PINK_ALPHA: f64 = 0.8;
pub const DEFAULT_COSINE_WINDOW: usize = 30;
pub const DEFAULT_SHIFT: usize = 10;
pub const DEFAULT_INTERP_OFFSET: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentTag {
    Gaussian,
    PinkJitter,
    Interpolate,
    CosConv,
    TimeShift,
    GaussInterp,
    PinkConv,
    GaussShift,
    HFlip,
    VFlip,
}

impl AugmentTag {
    /// Variant order produced by [`augment_sample`].
    pub const ORDER: [AugmentTag; VARIANTS_PER_SAMPLE] = [
        AugmentTag::Gaussian,
        AugmentTag::PinkJitter,
        AugmentTag::Interpolate,
        AugmentTag::CosConv,
        AugmentTag::TimeShift,
        AugmentTag::GaussInterp,
        AugmentTag::PinkConv,
        AugmentTag::GaussShift,
        AugmentTag::HFlip,
        AugmentTag::VFlip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentTag::Gaussian => "gaussian",
            AugmentTag::PinkJitter => "pink_jitter",
            AugmentTag::Interpolate => "interpolate",
            AugmentTag::CosConv => "cosconv",
            AugmentTag::TimeShift => "timeshift",
            AugmentTag::GaussInterp => "gauss_interp",
            AugmentTag::PinkConv => "pink_conv",
            AugmentTag::GaussShift => "gauss_shift",
            AugmentTag::HFlip => "hflip",
            AugmentTag::VFlip => "vflip",
        }
    }
}

impl fmt::Display for AugmentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AugmentTag::ORDER
            .iter()
            .copied()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| Error::data(format!("unknown augmentation tag '{s}'")))
    }
}

/// Parameters shared by the augmentation strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub sigma: f64,
    pub pink: PinkNoiseConfig,
    pub interp_offset: f64,
    pub cosine_window: usize,
    pub shift: usize,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            sigma: DEFAULT_NOISE_SIGMA,
            pink: PinkNoiseConfig::default(),
            interp_offset: DEFAULT_INTERP_OFFSET,
            cosine_window: DEFAULT_COSINE_WINDOW,
            shift: DEFAULT_SHIFT,
        }
    }
}

impl AugmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !(self.pink.sigma >= 0.0) {
            return Err(Error::usage("noise sigma must be >= 0"));
        }
        if !(self.pink.alpha > 0.0 && self.pink.alpha < 2.0) {
            return Err(Error::usage(format!(
                "pink noise alpha must be in (0, 2), got {}",
                self.pink.alpha
            )));
        }
        if self.cosine_window < 2 {
            return Err(Error::usage("cosine window must be >= 2"));
        }
        if !(self.interp_offset > 0.0 && self.interp_offset < 1.0) {
            return Err(Error::usage("interpolation offset must be in (0, 1)"));
        }
        Ok(())
    }
}

fn gaussian_noise_rng<R: Rng>(x: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::usage(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(x.to_vec());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::usage(e.to_string()))?;
    Ok(x.iter().map(|v| v + normal.sample(rng)).collect())
}

/// Adds `N(0, sigma^2)` noise, deterministic per seed.
pub fn gaussian_noise(x: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    gaussian_noise_rng(x, sigma, &mut seed::rng(seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinkNoiseConfig {
    pub alpha: f64,
    pub sigma: f64,
    /// Nominal tracker sample rate, used only to place the high-pass cutoff.
    pub sample_rate_hz: f64,
    /// Bins below this frequency are zeroed when set.
    pub highpass_hz: Option<f64>,
}

impl Default for PinkNoiseConfig {
    fn default() -> Self {
        PinkNoiseConfig {
            alpha: DEFAULT_PINK_ALPHA,
            sigma: DEFAULT_NOISE_SIGMA,
            sample_rate_hz: 30.0,
            highpass_hz: None,
        }
    }
}

fn pink_noise_rng<R: Rng>(n: usize, cfg: &PinkNoiseConfig, rng: &mut R) -> Result<Vec<f64>> {
    if n < 8 {
        return Err(Error::usage(format!("pink noise needs n >= 8, got {n}")));
    }
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let cutoff_bin = cfg
        .highpass_hz
        .map(|hz| hz * n as f64 / cfg.sample_rate_hz)
        .unwrap_or(0.0);
    buf[0] = Complex::new(0.0, 0.0);
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        // Mirror index keeps the spectrum Hermitian so the output stays real.
        let f = k.min(n - k) as f64;
        if f < cutoff_bin {
            *c = Complex::new(0.0, 0.0);
        } else {
            *c *= f.powf(-cfg.alpha / 2.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re / n as f64).collect();
    let mean = crate::stats::mean(&out);
    out.iter_mut().for_each(|v| *v -= mean);
    let sd = crate::stats::population_sd(&out);
    if sd > 0.0 {
        let scale = cfg.sigma / sd;
        out.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}

/// Zero-mean noise with power spectral density proportional to `1/f^alpha`,
/// scaled to standard deviation `sigma`.
pub fn pink_noise(n: usize, alpha: f64, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    let cfg = PinkNoiseConfig {
        alpha,
        sigma,
        ..PinkNoiseConfig::default()
    };
    pink_noise_with(n, &cfg, seed)
}

pub fn pink_noise_with(n: usize, cfg: &PinkNoiseConfig, seed: u64) -> Result<Vec<f64>> {
    pink_noise_rng(n, cfg, &mut seed::rng(seed))
}

/// Samples `x` at fractional positions `i + offset_frac`; the last sample is
/// replicated.
pub fn interpolate_variant(x: &[f64], offset_frac: f64) -> Result<Vec<f64>> {
    if !(offset_frac > 0.0 && offset_frac < 1.0) {
        return Err(Error::usage(format!(
            "interpolation offset must be in (0, 1), got {offset_frac}"
        )));
    }
    if x.len() < 2 {
        return Err(Error::usage("interpolation needs at least 2 samples"));
    }
    let n = x.len();
    Ok((0..n)
        .map(|i| {
            if i + 1 < n {
                x[i] + offset_frac * (x[i + 1] - x[i])
            } else {
                x[n - 1]
            }
        })
        .collect())
}

/// Raised-cosine window `w(n) = (1 - cos(2 pi n / (N - 1))) / 2`, unnormalized.
pub fn raised_cosine(window: usize) -> Vec<f64> {
    let denom = (window - 1) as f64;
    (0..window)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / denom).cos()))
        .collect()
}

/// Same-length convolution with the unit-sum raised-cosine kernel,
/// replicate-padded. Kernel index `(N - 1) / 2` sits on the output sample.
pub fn cosine_convolve(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 2 {
        return Err(Error::usage(format!(
            "cosine window must be >= 2, got {window}"
        )));
    }
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let mut w = raised_cosine(window);
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let c = ((window - 1) / 2) as isize;
    let n = x.len() as isize;
    Ok((0..n)
        .map(|i| {
            w.iter()
                .enumerate()
                .map(|(j, wj)| wj * x[(i + c - j as isize).clamp(0, n - 1) as usize])
                .sum()
        })
        .collect())
}

/// Circular shift to the right by `s` samples.
pub fn time_shift(x: &[f64], s: usize) -> Result<Vec<f64>> {
    if s >= x.len() && !(x.is_empty() && s == 0) {
        return Err(Error::usage(format!(
            "shift {s} must be smaller than series length {}",
            x.len()
        )));
    }
    let mut out = x.to_vec();
    out.rotate_right(s);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipAxis {
    /// Swap the top and bottom AOI rows.
    Horizontal,
    /// Swap the leftmost and rightmost AOI columns.
    Vertical,
}

/// Where AOI index `k` (0-based) lands under a flip.
pub fn flip_index(k: usize, axis: FlipAxis) -> usize {
    let (row, col) = (k / AOI_COLUMNS, k % AOI_COLUMNS);
    match axis {
        FlipAxis::Horizontal => (AOI_ROWS - 1 - row) * AOI_COLUMNS + col,
        FlipAxis::Vertical if col == 0 || col == AOI_COLUMNS - 1 => {
            row * AOI_COLUMNS + (AOI_COLUMNS - 1 - col)
        }
        FlipAxis::Vertical => k,
    }
}

/// Flips a row-major 15-entry per-AOI error map.
pub fn flip_aoi(errmap: &[f64], axis: FlipAxis) -> Result<Vec<f64>> {
    if errmap.len() != AOI_COUNT {
        return Err(Error::usage(format!(
            "AOI map must have {AOI_COUNT} entries, got {}",
            errmap.len()
        )));
    }
    let mut out = vec![0.0; AOI_COUNT];
    for (k, v) in errmap.iter().enumerate() {
        out[flip_index(k, axis)] = *v;
    }
    Ok(out)
}

/// Flips a series by relabelling AOI ids; its per-AOI maps flip exactly as
/// [`flip_aoi`] would flip them.
pub fn flip_series(errors: &ErrorSeries, axis: FlipAxis) -> ErrorSeries {
    let mut out = errors.clone();
    for id in &mut out.aoi_ids {
        *id = (flip_index(usize::from(*id) - 1, axis) + 1) as u8;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentVariant {
    pub tag: AugmentTag,
    pub series: ErrorSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSet {
    pub variants: Vec<AugmentVariant>,
    pub seed: u64,
}

fn with_noise<R: Rng>(
    s: &ErrorSeries,
    rng: &mut R,
    mut noise: impl FnMut(&[f64], &mut R) -> Result<Vec<f64>>,
) -> Result<ErrorSeries> {
    let mut out = s.clone();
    for c in crate::geometry::Category::ALL {
        let v = noise(s.channel(c), rng)?;
        *out.channel_mut(c) = v;
    }
    Ok(out)
}

fn map_fallible(s: &ErrorSeries, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<ErrorSeries> {
    let mut out = s.clone();
    for c in crate::geometry::Category::ALL {
        *out.channel_mut(c) = f(s.channel(c))?;
    }
    Ok(out)
}

/// The ten augmentation variants of one cleaned error series with default
/// parameters. Variant `i` draws its noise from seed `seed + i`.
pub fn augment_sample(errors: &ErrorSeries, seed: u64) -> Result<AugmentedSet> {
    augment_sample_with(errors, seed, &AugmentParams::default())
}

pub fn augment_sample_with(
    errors: &ErrorSeries,
    seed: u64,
    p: &AugmentParams,
) -> Result<AugmentedSet> {
    p.validate()?;
    errors.check_consistent()?;
    if errors.len() < p.cosine_window {
        return Err(Error::data(format!(
            "series has {} samples; augmentation needs at least {} (convolution window)",
            errors.len(),
            p.cosine_window
        )));
    }
    let gauss = |x: &[f64], rng: &mut rand_chacha::ChaCha8Rng| gaussian_noise_rng(x, p.sigma, rng);
    let pink = |x: &[f64], rng: &mut rand_chacha::ChaCha8Rng| -> Result<Vec<f64>> {
        let jitter = pink_noise_rng(x.len(), &p.pink, rng)?;
        Ok(x.iter().zip(jitter).map(|(a, b)| a + b).collect())
    };
    let interp = |x: &[f64]| interpolate_variant(x, p.interp_offset);
    let conv = |x: &[f64]| cosine_convolve(x, p.cosine_window);
    let shift = |x: &[f64]| time_shift(x, p.shift);
    let rng = |i: usize| seed::rng(seed.wrapping_add(i as u64));

    let interpolated = map_fallible(errors, interp)?;
    let convolved = map_fallible(errors, conv)?;
    let shifted = map_fallible(errors, shift)?;

    let mut variants = Vec::with_capacity(VARIANTS_PER_SAMPLE);
    for (i, tag) in AugmentTag::ORDER.iter().copied().enumerate() {
        let series = match tag {
            AugmentTag::Gaussian => with_noise(errors, &mut rng(i), gauss)?,
            AugmentTag::PinkJitter => with_noise(errors, &mut rng(i), pink)?,
            AugmentTag::Interpolate => interpolated.clone(),
            AugmentTag::CosConv => convolved.clone(),
            AugmentTag::TimeShift => shifted.clone(),
            AugmentTag::GaussInterp => with_noise(&interpolated, &mut rng(i), gauss)?,
            AugmentTag::PinkConv => with_noise(&convolved, &mut rng(i), pink)?,
            AugmentTag::GaussShift => with_noise(&shifted, &mut rng(i), gauss)?,
            AugmentTag::HFlip => flip_series(errors, FlipAxis::Horizontal),
            AugmentTag::VFlip => flip_series(errors, FlipAxis::Vertical),
        };
        variants.push(AugmentVariant { tag, series });
    }
    Ok(AugmentedSet { variants, seed })
}

const SERIES_COLUMNS: [&str; 5] = [
    "timestamp_ms",
    "aoi_id",
    "frontal_err",
    "yaw_err",
    "pitch_err",
];

/// Error-series CSV: the session header lines, an optional
/// `# augmented_by=<tag>` line, then one row per sample.
pub fn series_to_string(
    series: &ErrorSeries,
    meta: &SessionMeta,
    screen: &ScreenConfig,
    tag: Option<AugmentTag>,
) -> String {
    let mut out = header_lines(meta, screen);
    if let Some(t) = tag {
        out.push_str(&format!("# augmented_by={t}\n"));
    }
    out.push_str(&SERIES_COLUMNS.join(","));
    out.push('\n');
    for i in 0..series.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            series.timestamps[i],
            series.aoi_ids[i],
            series.frontal_err[i],
            series.yaw_err[i],
            series.pitch_err[i]
        ));
    }
    out
}

pub fn save_series(
    series: &ErrorSeries,
    meta: &SessionMeta,
    screen: &ScreenConfig,
    tag: Option<AugmentTag>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, series_to_string(series, meta, screen, tag)).map_err(|e| Error::io(path, e))
}

/// Parses an error-series CSV; returns the series, its header and the
/// augmentation tag if present.
pub fn parse_series(text: &str) -> Result<(ErrorSeries, HeaderMap, Option<AugmentTag>)> {
    let (header, body) = split_header(text)?;
    let tag = header.get("augmented_by").map(str::parse).transpose()?;
    let mut lines = body
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines
        .next()
        .ok_or_else(|| Error::data("error series has no column header"))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols != SERIES_COLUMNS {
        return Err(Error::data(format!(
            "expected columns {}, found '{head}'",
            SERIES_COLUMNS.join(",")
        )));
    }
    let mut s = ErrorSeries::default();
    for (i, line) in lines {
        let row = i + 1;
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != SERIES_COLUMNS.len() {
            return Err(Error::data(format!(
                "row {row}: expected 5 fields, found {}",
                f.len()
            )));
        }
        let num = |j: usize| -> Result<f64> {
            f[j].parse().map_err(|_| {
                Error::data(format!(
                    "row {row}: column {}: cannot parse '{}'",
                    SERIES_COLUMNS[j], f[j]
                ))
            })
        };
        s.timestamps.push(
            f[0].parse()
                .map_err(|_| Error::data(format!("row {row}: bad timestamp '{}'", f[0])))?,
        );
        let id: u8 = f[1]
            .parse()
            .map_err(|_| Error::data(format!("row {row}: bad aoi_id '{}'", f[1])))?;
        if id == 0 || usize::from(id) > AOI_COUNT {
            return Err(Error::data(format!(
                "row {row}: aoi_id {id} outside 1..={AOI_COUNT}"
            )));
        }
        s.aoi_ids.push(id);
        s.frontal_err.push(num(2)?);
        s.yaw_err.push(num(3)?);
        s.pitch_err.push(num(4)?);
    }
    if s.is_empty() {
        return Err(Error::data("error series has no rows"));
    }
    Ok((s, header, tag))
}

pub fn load_series(path: impl AsRef<Path>) -> Result<(ErrorSeries, HeaderMap, Option<AugmentTag>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series(&text)
}
