use super::Sample;
use crate::kv::KvFile;
use crate::tensor::{Float, Rng, Tensor};
use crate::{Error, Result};

/// Parameters of the synthetic cell generator. Ranges are inclusive `(lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    /// 1 (grayscale) or 3.
    pub channels: usize,
    pub cell_count: (usize, usize),
    /// Semi-major axis in pixels.
    pub radius: (f64, f64),
    /// `0` is a circle; the semi-minor axis is `radius · √(1 − e²)`.
    pub eccentricity: (f64, f64),
    /// Brightness added inside a cell.
    pub intensity_fg: (f64, f64),
    pub intensity_bg: (f64, f64),
    pub noise_std: f64,
    pub overlap_allowed: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            height: 64,
            width: 64,
            channels: 1,
            cell_count: (2, 6),
            radius: (4.0, 10.0),
            eccentricity: (0.0, 0.8),
            intensity_fg: (0.4, 0.6),
            intensity_bg: (0.1, 0.3),
            noise_std: 0.03,
            overlap_allowed: false,
            seed: 0,
        }
    }
}

const SPEC_KEYS: &[&str] = &[
    "height",
    "width",
    "channels",
    "cells",
    "radius",
    "eccentricity",
    "intensity.fg",
    "intensity.bg",
    "noise_std",
    "overlap",
    "seed",
];

/// Attempts per cell before a non-overlapping placement is abandoned.
const PLACEMENT_TRIES: usize = 50;

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64, max: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && min <= lo && lo <= hi && hi <= max) {
        return Err(Error::Config(format!("{name} range ({lo}, {hi}) must be ordered within [{min}, {max}]")));
    }
    Ok(())
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let (h, w) = (self.height, self.width);
        if h == 0 || w == 0 || h % 16 != 0 || w % 16 != 0 || h > 4096 || w > 4096 {
            return Err(Error::Config(format!("image size {h}×{w} must be divisible by 16 and at most 4096")));
        }
        if !matches!(self.channels, 1 | 3) {
            return Err(Error::Config(format!("channels must be 1 or 3, got {}", self.channels)));
        }
        if self.cell_count.0 > self.cell_count.1 || self.cell_count.1 > 1000 {
            return Err(Error::Config(format!("cell count range {:?} is empty or too large", self.cell_count)));
        }
        check_range("radius", self.radius, 2.0, h.min(w) as f64 / 2.0)?;
        check_range("eccentricity", self.eccentricity, 0.0, 0.99)?;
        check_range("intensity.fg", self.intensity_fg, 0.0, 1.0)?;
        check_range("intensity.bg", self.intensity_bg, 0.0, 1.0)?;
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Config(format!("noise_std {} must be a nonnegative number", self.noise_std)));
        }
        Ok(())
    }

    /// Reads a spec file; absent keys keep their defaults.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        kv.reject_unknown(SPEC_KEYS)?;
        let d = SynthSpec::default();
        let spec = SynthSpec {
            height: kv.get_or("height", d.height)?,
            width: kv.get_or("width", d.width)?,
            channels: kv.get_or("channels", d.channels)?,
            cell_count: kv.range("cells")?.unwrap_or(d.cell_count),
            radius: kv.range("radius")?.unwrap_or(d.radius),
            eccentricity: kv.range("eccentricity")?.unwrap_or(d.eccentricity),
            intensity_fg: kv.range("intensity.fg")?.unwrap_or(d.intensity_fg),
            intensity_bg: kv.range("intensity.bg")?.unwrap_or(d.intensity_bg),
            noise_std: kv.get_or("noise_std", d.noise_std)?,
            overlap_allowed: kv.get_or("overlap", d.overlap_allowed)?,
            seed: kv.get_or("seed", d.seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvFile::parse(text)?)
    }
}

/// An ellipse in pixel coordinates; pixel `(y, x)` covers `[y, y+1) × [x, x+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cy: f64,
    pub cx: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Rotation of the major axis from the x axis, radians.
    pub angle: f64,
}

impl Ellipse {
    pub fn contains(&self, y: f64, x: f64) -> bool {
        let (dy, dx) = (y - self.cy, x - self.cx);
        let (s, c) = self.angle.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_major).powi(2) + (v / self.semi_minor).powi(2) <= 1.0
    }
}

/// Marks every pixel whose centre lies inside `e`. Returns the pixel indices set.
pub fn rasterize_ellipse(e: &Ellipse, height: usize, width: usize) -> Vec<usize> {
    let r = e.semi_major.ceil() + 1.0;
    let y0 = (e.cy - r).floor().max(0.0) as usize;
    let y1 = ((e.cy + r).ceil().max(0.0) as usize).min(height);
    let x0 = (e.cx - r).floor().max(0.0) as usize;
    let x1 = ((e.cx + r).ceil().max(0.0) as usize).min(width);
    let mut out = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            if e.contains(y as f64 + 0.5, x as f64 + 0.5) {
                out.push(y * width + x);
            }
        }
    }
    out
}

fn draw_ellipse(spec: &SynthSpec, rng: &mut Rng) -> Ellipse {
    let a = rng.uniform(spec.radius.0, spec.radius.1);
    let e = rng.uniform(spec.eccentricity.0, spec.eccentricity.1);
    let b = (a * (1.0 - e * e).sqrt()).max(2.0_f64.min(a));
    Ellipse {
        cy: rng.uniform(a, spec.height as f64 - a),
        cx: rng.uniform(a, spec.width as f64 - a),
        semi_major: a,
        semi_minor: b,
        angle: rng.uniform(0.0, std::f64::consts::PI),
    }
}

/// Deterministic sample number `index` of the dataset described by `spec`.
///
/// The random stream is derived from `(spec.seed, index)` alone, so samples
/// can be produced in any order.
pub fn gen_sample<T: Float>(spec: &SynthSpec, index: u64) -> Result<Sample<T>> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut rng = Rng::new(spec.seed).derive(index);
    let count = rng.int_inclusive(spec.cell_count.0, spec.cell_count.1);
    let background = rng.uniform(spec.intensity_bg.0, spec.intensity_bg.1);
    let mut mask = vec![false; h * w];
    let mut clean = vec![background; h * w];
    for _ in 0..count {
        let fg = rng.uniform(spec.intensity_fg.0, spec.intensity_fg.1);
        let mut placed = None;
        for _ in 0..PLACEMENT_TRIES {
            let pixels = rasterize_ellipse(&draw_ellipse(spec, &mut rng), h, w);
            if spec.overlap_allowed || pixels.iter().all(|&p| !mask[p]) {
                placed = Some(pixels);
                break;
            }
        }
        for p in placed.unwrap_or_default() {
            mask[p] = true;
            clean[p] = background + fg;
        }
    }
    let mut image = Vec::with_capacity(spec.channels * h * w);
    for _ in 0..spec.channels {
        for &v in &clean {
            let noisy = if spec.noise_std > 0.0 { v + spec.noise_std * rng.normal() } else { v };
            image.push(T::of(noisy.clamp(0.0, 1.0)));
        }
    }
    let mask = mask.into_iter().map(|m| if m { T::one() } else { T::zero() }).collect();
    Sample::new(Tensor::new([spec.channels, h, w], image)?, Tensor::new([1, h, w], mask)?, index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_file_overrides_defaults() {
        let spec = SynthSpec::parse("height = 32\ncells = 1, 3\noverlap = true").unwrap();
        assert_eq!((spec.height, spec.width, spec.cell_count, spec.overlap_allowed), (32, 64, (1, 3), true));
        assert!(SynthSpec::parse("radius = 1, 3").is_err());
        assert!(SynthSpec::parse("colour = 3").is_err());
    }

    #[test]
    fn rotated_ellipse_is_symmetric() {
        let e = Ellipse { cy: 16.0, cx: 16.0, semi_major: 8.0, semi_minor: 3.0, angle: 0.7 };
        let a = rasterize_ellipse(&e, 32, 32);
        let b = rasterize_ellipse(&Ellipse { angle: 0.7 + std::f64::consts::PI, ..e }, 32, 32);
        assert_eq!(a, b);
    }
}
