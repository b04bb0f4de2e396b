//! Predict-then-focus geometry: pupil-anchored ROI from a segmentation
//! mask, refresh cadence and staleness, and synthetic eye masks.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::GrayImage;
use crate::optics::SceneImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EyeClass {
    Background,
    Sclera,
    Iris,
    Pupil,
}

impl EyeClass {
    /// Gray level used in mask files.
    pub fn code(self) -> u8 {
        match self {
            EyeClass::Background => 0,
            EyeClass::Sclera => 64,
            EyeClass::Iris => 128,
            EyeClass::Pupil => 255,
        }
    }

    pub fn from_code(v: u8) -> Option<Self> {
        match v {
            0 => Some(EyeClass::Background),
            64 => Some(EyeClass::Sclera),
            128 => Some(EyeClass::Iris),
            255 => Some(EyeClass::Pupil),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMask {
    pub height: usize,
    pub width: usize,
    /// Row-major labels.
    pub labels: Vec<EyeClass>,
}

impl SegMask {
    pub fn filled(height: usize, width: usize, class: EyeClass) -> Self {
        SegMask {
            height,
            width,
            labels: vec![class; height * width],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> EyeClass {
        self.labels[r * self.width + c]
    }

    pub fn set(&mut self, r: usize, c: usize, class: EyeClass) {
        self.labels[r * self.width + c] = class;
    }

    pub fn from_gray(img: &GrayImage) -> Result<Self> {
        let labels = img
            .pixels
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                EyeClass::from_code(v).ok_or_else(|| {
                    Error::validation(
                        format!("pixel ({}, {})", i / img.width, i % img.width),
                        format!("class code {v} is not one of 0, 64, 128, 255"),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SegMask {
            height: img.height,
            width: img.width,
            labels,
        })
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::new(self.height, self.width, self.labels.iter().map(|c| c.code()).collect())
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = crate::io::read_pgm(path)?;
        SegMask::from_gray(&img).map_err(|e| match e {
            Error::Validation { path: p, msg } => Error::format(path, format!("{p}: {msg}")),
            e => e,
        })
    }

    /// Copy shifted by `(dr, dc)`; pixels shifted in are background.
    pub fn translated(&self, dr: isize, dc: isize) -> SegMask {
        let mut out = SegMask::filled(self.height, self.width, EyeClass::Background);
        for r in 0..self.height {
            for c in 0..self.width {
                let (sr, sc) = (r as isize - dr, c as isize - dc);
                if sr >= 0 && sc >= 0 && (sr as usize) < self.height && (sc as usize) < self.width {
                    out.set(r, c, self.get(sr as usize, sc as usize));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiMode {
    FixedSize,
    ScleraScaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiPolicy {
    pub mode: RoiMode,
    pub out_h: usize,
    pub out_w: usize,
    pub scale: f64,
    pub refresh_n: usize,
    pub pipeline_delay_frames: usize,
}

impl Default for RoiPolicy {
    fn default() -> Self {
        RoiPolicy {
            mode: RoiMode::FixedSize,
            out_h: 96,
            out_w: 160,
            scale: 1.5,
            refresh_n: 50,
            pipeline_delay_frames: 50,
        }
    }
}

impl RoiPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.out_h == 0 || self.out_w == 0 {
            return Err(Error::validation("/out_h", "ROI dims must be positive"));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::validation("/scale", "scale must be > 0"));
        }
        if self.refresh_n == 0 {
            return Err(Error::validation("/refresh_n", "refresh_n must be >= 1"));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: RoiPolicy = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiRect {
    pub row0: usize,
    pub col0: usize,
    #[serde(rename = "h")]
    pub height: usize,
    #[serde(rename = "w")]
    pub width: usize,
}

impl RoiRect {
    pub fn contains(&self, r: f64, c: f64) -> bool {
        r >= self.row0 as f64
            && r < (self.row0 + self.height) as f64
            && c >= self.col0 as f64
            && c < (self.col0 + self.width) as f64
    }

    pub fn fits(&self, h: usize, w: usize) -> bool {
        self.height > 0 && self.width > 0 && self.row0 + self.height <= h && self.col0 + self.width <= w
    }
}

/// Mean coordinate of the pupil pixels.
pub fn pupil_centroid(mask: &SegMask) -> Result<(f64, f64)> {
    let (mut n, mut sr, mut sc) = (0usize, 0.0, 0.0);
    for r in 0..mask.height {
        for c in 0..mask.width {
            if mask.get(r, c) == EyeClass::Pupil {
                n += 1;
                sr += r as f64;
                sc += c as f64;
            }
        }
    }
    if n == 0 {
        return Err(Error::NoPupil);
    }
    Ok((sr / n as f64, sc / n as f64))
}

/// Bounding-box height and width of the sclera pixels.
pub fn sclera_extent(mask: &SegMask) -> Result<(usize, usize)> {
    let mut b: Option<(usize, usize, usize, usize)> = None;
    for r in 0..mask.height {
        for c in 0..mask.width {
            if mask.get(r, c) == EyeClass::Sclera {
                b = Some(match b {
                    None => (r, r, c, c),
                    Some((r0, r1, c0, c1)) => (r0.min(r), r1.max(r), c0.min(c), c1.max(c)),
                });
            }
        }
    }
    let (r0, r1, c0, c1) = b.ok_or(Error::NoSclera)?;
    Ok((r1 - r0 + 1, c1 - c0 + 1))
}

fn ceil_even(x: f64) -> usize {
    let v = x.ceil().max(1.0) as usize;
    v + v % 2
}

/// Places an `h x w` box centered on `(cr, cc)`, shifted minimally into
/// an `ih x iw` image.
fn centered(cr: f64, cc: f64, h: usize, w: usize, ih: usize, iw: usize) -> RoiRect {
    let (h, w) = (h.min(ih), w.min(iw));
    let place = |center: f64, len: usize, limit: usize| -> usize {
        let start = (center - len as f64 / 2.0 + 0.5).floor();
        start.clamp(0.0, (limit - len) as f64) as usize
    };
    RoiRect {
        row0: place(cr, h, ih),
        col0: place(cc, w, iw),
        height: h,
        width: w,
    }
}

pub fn predict_roi(mask: &SegMask, policy: &RoiPolicy) -> Result<RoiRect> {
    policy.validate()?;
    let (cr, cc) = pupil_centroid(mask)?;
    let (h, w) = match policy.mode {
        RoiMode::FixedSize => (policy.out_h, policy.out_w),
        RoiMode::ScleraScaled => {
            let (eh, ew) = sclera_extent(mask)?;
            (ceil_even(policy.scale * eh as f64), ceil_even(policy.scale * ew as f64))
        }
    };
    Ok(centered(cr, cc, h, w, mask.height, mask.width))
}

/// Centered policy-size crop used before the first segmentation lands.
pub fn bootstrap_roi(height: usize, width: usize, policy: &RoiPolicy) -> RoiRect {
    centered(height as f64 / 2.0, width as f64 / 2.0, policy.out_h, policy.out_w, height, width)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum RoiSource {
    Bootstrap,
    /// ROI from the segmentation launched at frame `generation · refresh_n`.
    Generation { generation: usize, staleness: usize },
}

pub fn roi_for_frame(t: usize, policy: &RoiPolicy) -> RoiSource {
    let d = policy.pipeline_delay_frames;
    if t < d {
        return RoiSource::Bootstrap;
    }
    let g = (t - d) / policy.refresh_n;
    RoiSource::Generation {
        generation: g,
        staleness: t - g * policy.refresh_n,
    }
}

/// Segmentation MACs charged to each frame when it runs every `n` frames.
pub fn seg_macs_per_frame(seg_macs: u64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Parameter("refresh period must be >= 1".into()));
    }
    Ok(seg_macs as f64 / n as f64)
}

pub fn crop(image: &SceneImage, rect: &RoiRect) -> Result<SceneImage> {
    if !rect.fits(image.height(), image.width()) {
        return Err(Error::OutOfRange(format!(
            "rect {rect:?} outside {}x{} image",
            image.height(),
            image.width()
        )));
    }
    let v = image
        .values
        .view((rect.row0, rect.col0), (rect.height, rect.width))
        .into_owned();
    SceneImage::new(v)
}

/// Parameters of a synthetic eye: nested pupil disk, iris disk and
/// sclera ellipse on a background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthEye {
    pub height: usize,
    pub width: usize,
    pub center: (f64, f64),
    pub pupil_r: f64,
    pub iris_r: f64,
    /// Sclera semi-axes (rows, cols).
    pub sclera_axes: (f64, f64),
    /// Relative boundary wobble amplitude; 0 gives exact ellipses.
    pub jitter: f64,
}

impl SynthEye {
    pub fn centered(height: usize, width: usize) -> Self {
        SynthEye {
            height,
            width,
            center: (height as f64 / 2.0, width as f64 / 2.0),
            pupil_r: height as f64 / 16.0,
            iris_r: height as f64 / 8.0,
            sclera_axes: (height as f64 / 4.0, width as f64 / 2.5),
            jitter: 0.0,
        }
    }
}

pub fn synth_eye_mask(p: &SynthEye, seed: u64) -> Result<SegMask> {
    let (ar, ac) = p.sclera_axes;
    if !(p.pupil_r > 0.0 && p.pupil_r < p.iris_r && p.iris_r < ar.min(ac)) {
        return Err(Error::Parameter(format!(
            "need 0 < pupil_r < iris_r < min(sclera_axes), got {} / {} / {:?}",
            p.pupil_r, p.iris_r, p.sclera_axes
        )));
    }
    if p.height == 0 || p.width == 0 || !(p.jitter >= 0.0 && p.jitter < 0.5) {
        return Err(Error::Parameter("image dims must be positive and jitter in [0, 0.5)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // three low harmonics per boundary give smooth, seed-dependent wobble
    let mut harmonics = [[(0.0f64, 0.0f64); 3]; 3];
    for b in harmonics.iter_mut() {
        for (k, h) in b.iter_mut().enumerate() {
            *h = (rng.random_range(-1.0..1.0) / (k + 1) as f64, rng.random_range(0.0..std::f64::consts::TAU));
        }
    }
    let wobble = |b: usize, theta: f64| -> f64 {
        if p.jitter == 0.0 {
            return 1.0;
        }
        let s: f64 = harmonics[b]
            .iter()
            .enumerate()
            .map(|(k, (a, ph))| a * ((k + 2) as f64 * theta + ph).cos())
            .sum();
        1.0 + p.jitter * s / 1.84
    };
    let mut m = SegMask::filled(p.height, p.width, EyeClass::Background);
    let (cr, cc) = p.center;
    for r in 0..p.height {
        for c in 0..p.width {
            let (dr, dc) = (r as f64 - cr, c as f64 - cc);
            let theta = dr.atan2(dc);
            let radial = (dr * dr + dc * dc).sqrt();
            let ell = ((dr / ar).powi(2) + (dc / ac).powi(2)).sqrt();
            let class = if radial <= p.pupil_r * wobble(0, theta) {
                EyeClass::Pupil
            } else if radial <= p.iris_r * wobble(1, theta) {
                EyeClass::Iris
            } else if ell <= wobble(2, theta) {
                EyeClass::Sclera
            } else {
                EyeClass::Background
            };
            m.set(r, c, class);
        }
    }
    Ok(m)
}

/// Intensity image of a mask, useful as a synthetic scene.
pub fn mask_scene(mask: &SegMask) -> SceneImage {
    let v = DMatrix::from_fn(mask.height, mask.width, |r, c| match mask.get(r, c) {
        EyeClass::Background => 0.55,
        EyeClass::Sclera => 0.9,
        EyeClass::Iris => 0.35,
        EyeClass::Pupil => 0.05,
    });
    SceneImage::new(v).expect("finite values")
}
