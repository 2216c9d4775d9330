//! Deterministic tile-parallel rendering of parameter and dynamical planes.
//!
//! Every pixel is a pure function of its complex coordinate, so the output
//! bytes do not depend on how tiles are scheduled.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::RENDER_MAX_ITER;
use crate::family::{escape_bound, eval_odd, odd_ratios, BicriticalOdd, FamilyError, MonicOdd, PolyMap, Unicritical};
use crate::loci::{membership_pm, Outcome, PmParams, Reason};
use crate::scalar::{norm_sqr, powu, Real};

pub const TILE: usize = 64;

/// Fraction of budget-exhausted pixels above which smooth renders warn.
pub const BUDGET_WARNING_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid viewport: {0}")]
    InvalidViewport(String),
    #[error("supersample must be 1, 2 or 4, got {0}")]
    InvalidSupersample(u32),
    #[error("invalid render job: {0}")]
    InvalidJob(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("cannot build worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Error)]
pub enum PpmError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed PPM: {0}")]
    Format(String),
}

/// A rectangle of the complex plane sampled on a square pixel grid.
///
/// Pixel `(i, j)` covers the point
/// `center + ((i + 0.5)/px_w - 0.5)·width + i·((j + 0.5)/px_h - 0.5)·height`
/// with `height = width·px_h/px_w`, so `j = 0` is the lowest row in the
/// plane. Image rows are stored top-down, i.e. buffer row `r` holds
/// `j = px_h - 1 - r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub center: Complex64,
    pub width: f64,
    pub px_w: u32,
    pub px_h: u32,
}

impl Viewport {
    pub fn new(center: Complex64, width: f64, px_w: u32, px_h: u32) -> Result<Self, RenderError> {
        let v = Viewport { center, width, px_w, px_h };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(RenderError::InvalidViewport("width must be positive and finite".into()));
        }
        if self.px_w == 0 || self.px_h == 0 {
            return Err(RenderError::InvalidViewport("pixel dimensions must be positive".into()));
        }
        if !(self.center.re.is_finite() && self.center.im.is_finite()) {
            return Err(RenderError::InvalidViewport("center must be finite".into()));
        }
        Ok(())
    }

    pub fn height(&self) -> f64 {
        self.width * self.px_h as f64 / self.px_w as f64
    }

    /// Side length of one pixel.
    pub fn pitch(&self) -> f64 {
        self.width / self.px_w as f64
    }

    /// Coordinate of subsample `(k, l)` of pixel `(i, j)` on an `ss × ss`
    /// grid. The integer offset is formed first, so mirror-image pixels get
    /// exactly negated offsets.
    #[inline]
    pub fn sample(&self, i: u32, j: u32, k: u32, l: u32, ss: u32) -> Complex64 {
        let half = self.pitch() / (2 * ss) as f64;
        let x = (2 * (i as i64 * ss as i64 + k as i64) + 1 - self.px_w as i64 * ss as i64) as f64;
        let y = (2 * (j as i64 * ss as i64 + l as i64) + 1 - self.px_h as i64 * ss as i64) as f64;
        Complex64::new(self.center.re + x * half, self.center.im + y * half)
    }

    /// Pixel center.
    pub fn pixel(&self, i: u32, j: u32) -> Complex64 {
        self.sample(i, j, 0, 0, 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DynamicalMap {
    Unicritical { d: u32, c: Complex64 },
    BicriticalOdd { d: u32, a: Complex64 },
    MonicOdd { d: u32, s: Complex64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Plane {
    /// `c`-plane of `z^degree + c`.
    ParameterMultibrot { degree: u32 },
    /// `a`-plane of `p_{a,d}`.
    ParameterCbo { d: u32 },
    /// `s`-plane of the monic representatives `P_s`.
    ParameterMbo { d: u32 },
    Dynamical { map: DynamicalMap },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coloring {
    Binary,
    SmoothPotential,
    PmVerdictOverlay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderJob {
    pub plane: Plane,
    pub viewport: Viewport,
    pub max_iter: usize,
    /// Raised per pixel to the certified bound of that pixel's map.
    pub escape_radius: Option<f64>,
    pub coloring: Coloring,
    pub supersample: u32,
}

impl RenderJob {
    pub fn new(plane: Plane, viewport: Viewport, coloring: Coloring) -> Self {
        RenderJob { plane, viewport, max_iter: RENDER_MAX_ITER, escape_radius: None, coloring, supersample: 1 }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        self.viewport.validate()?;
        if ![1, 2, 4].contains(&self.supersample) {
            return Err(RenderError::InvalidSupersample(self.supersample));
        }
        if self.max_iter == 0 {
            return Err(RenderError::InvalidJob("max_iter must be positive".into()));
        }
        if let Some(r) = self.escape_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(RenderError::InvalidJob("escape_radius must be positive".into()));
            }
        }
        match self.plane {
            Plane::ParameterMultibrot { degree } if degree < 2 => {
                return Err(RenderError::InvalidJob("Multibrot degree must be at least 2".into()))
            }
            Plane::ParameterCbo { d } | Plane::ParameterMbo { d } if d == 0 => {
                return Err(RenderError::Family(FamilyError::InvalidDegree(d)))
            }
            _ => {}
        }
        if self.coloring == Coloring::PmVerdictOverlay && !matches!(self.plane, Plane::ParameterCbo { .. }) {
            return Err(RenderError::InvalidJob("verdict overlay needs the cbo parameter plane".into()));
        }
        Ok(())
    }
}

/// Row-major 8-bit RGB image, top row first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        ImageBuffer { width, height, data: vec![0; width as usize * height as usize * 3] }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let o = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    /// The image turned by 180°.
    pub fn rotated_half_turn(&self) -> Self {
        let mut out = ImageBuffer::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let o = ((self.height - 1 - y) as usize * self.width as usize + (self.width - 1 - x) as usize) * 3;
                out.data[o..o + 3].copy_from_slice(&self.get(x, y));
            }
        }
        out
    }

    /// The image turned by 90° counterclockwise; needs a square image.
    pub fn rotated_quarter_turn(&self) -> Self {
        assert_eq!(self.width, self.height, "quarter turn needs a square image");
        let n = self.width;
        let mut out = ImageBuffer::new(n, n);
        for y in 0..n {
            for x in 0..n {
                // (x, y) goes to (y, n-1-x) in screen coordinates.
                let (nx, ny) = (y, n - 1 - x);
                let o = (ny as usize * n as usize + nx as usize) * 3;
                out.data[o..o + 3].copy_from_slice(&self.get(x, y));
            }
        }
        out
    }

    /// The image flipped top to bottom (complex conjugation of the plane).
    pub fn flipped_vertically(&self) -> Self {
        let row = self.width as usize * 3;
        let mut out = ImageBuffer::new(self.width, self.height);
        for y in 0..self.height as usize {
            let src = (self.height as usize - 1 - y) * row;
            out.data[y * row..(y + 1) * row].copy_from_slice(&self.data[src..src + row]);
        }
        out
    }

    pub fn differing_pixels(&self, other: &Self) -> usize {
        self.data.chunks(3).zip(other.data.chunks(3)).filter(|(a, b)| a != b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RenderWarning {
    /// Too many pixels used the whole iteration budget.
    BudgetTooSmall { fraction: f64 },
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: ImageBuffer,
    pub warnings: Vec<RenderWarning>,
}

/// Orbit outcome at one sample point.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Sample {
    Bounded,
    Escaped { iter: usize, modulus: f64, radius: f64, degree: u32 },
}

/// Per-job constants shared by every pixel.
enum Kernel {
    Multibrot { degree: u32 },
    Cbo { d: u32, ratios: Vec<f64>, sqrt_d: f64 },
    Mbo { d: u32, ratios: Vec<f64>, sqrt_d: f64, inv_t: f64 },
    Dynamical { map: Box<dyn PolyMap<f64> + Send + Sync>, radius: f64 },
}

fn float_ratios(d: u32) -> Vec<f64> {
    odd_ratios(d).iter().map(f64::from_rational).collect()
}

impl Kernel {
    fn new(plane: &Plane, escape_radius: Option<f64>) -> Result<Self, RenderError> {
        Ok(match *plane {
            Plane::ParameterMultibrot { degree } => Kernel::Multibrot { degree },
            Plane::ParameterCbo { d } => Kernel::Cbo { d, ratios: float_ratios(d), sqrt_d: (d as f64).sqrt() },
            Plane::ParameterMbo { d } => Kernel::Mbo {
                d,
                ratios: float_ratios(d),
                sqrt_d: (d as f64).sqrt(),
                inv_t: f64::from_rational(&crate::family::leading_ratio_exact(d).recip()),
            },
            Plane::Dynamical { map } => {
                let map: Box<dyn PolyMap<f64> + Send + Sync> = match map {
                    DynamicalMap::Unicritical { d, c } => Box::new(Unicritical::new(d, c)?),
                    DynamicalMap::BicriticalOdd { d, a } => Box::new(BicriticalOdd::new(d, a)?),
                    DynamicalMap::MonicOdd { d, s } => Box::new(MonicOdd::from_s(d, s)?),
                };
                let radius = map.escape_radius().max(escape_radius.unwrap_or(0.0));
                Kernel::Dynamical { map, radius }
            }
        })
    }

    #[inline]
    fn sample(&self, p: Complex64, max_iter: usize, escape_radius: Option<f64>) -> Sample {
        let floor = escape_radius.unwrap_or(0.0);
        match self {
            Kernel::Multibrot { degree } => {
                let lower = [p];
                let radius = escape_bound(&lower, Complex64::new(1.0, 0.0), *degree).max(floor);
                let r2 = radius * radius;
                let mut z = Complex64::new(0.0, 0.0);
                for n in 1..=max_iter {
                    z = powu(z, *degree) + p;
                    if !(norm_sqr(z) < r2) {
                        return Sample::Escaped { iter: n, modulus: z.norm(), radius, degree: *degree };
                    }
                }
                Sample::Bounded
            }
            Kernel::Cbo { d, ratios, sqrt_d } => odd_orbit(p, ratios, *d, *sqrt_d, max_iter, floor),
            Kernel::Mbo { d, ratios, sqrt_d, inv_t } => {
                if norm_sqr(p) == 0.0 {
                    return Sample::Bounded;
                }
                let a = powu(p, 2 * d) * *inv_t;
                odd_orbit(a, ratios, *d, *sqrt_d, max_iter, floor)
            }
            Kernel::Dynamical { map, radius } => {
                let r2 = radius * radius;
                let mut z = p;
                if !(norm_sqr(z) < r2) {
                    return Sample::Escaped { iter: 0, modulus: z.norm(), radius: *radius, degree: map.degree() };
                }
                for n in 1..=max_iter {
                    z = map.eval(z);
                    if !(norm_sqr(z) < r2) {
                        return Sample::Escaped { iter: n, modulus: z.norm(), radius: *radius, degree: map.degree() };
                    }
                }
                Sample::Bounded
            }
        }
    }
}

/// Orbit of `√d` under `p_a`, matching `BicriticalOdd` evaluation exactly.
#[inline]
fn odd_orbit(a: Complex64, ratios: &[f64], d: u32, sqrt_d: f64, max_iter: usize, floor: f64) -> Sample {
    if norm_sqr(a) == 0.0 {
        return Sample::Bounded;
    }
    let mut coeffs = [Complex64::new(0.0, 0.0); 16];
    let n = ratios.len();
    if n > coeffs.len() {
        let p = BicriticalOdd::new(d, a).expect("nonzero parameter");
        return generic_orbit(&p, Complex64::new(sqrt_d, 0.0), max_iter, floor);
    }
    for (c, r) in coeffs.iter_mut().zip(ratios) {
        *c = a * *r;
    }
    let odd = &coeffs[..n];
    let degree = 2 * d + 1;
    let radius = escape_bound(&odd[..n - 1], odd[n - 1], degree).max(floor);
    let r2 = radius * radius;
    let mut z = Complex64::new(sqrt_d, 0.0);
    if !(norm_sqr(z) < r2) {
        return Sample::Escaped { iter: 0, modulus: z.norm(), radius, degree };
    }
    for k in 1..=max_iter {
        z = eval_odd(odd, z);
        if !(norm_sqr(z) < r2) {
            return Sample::Escaped { iter: k, modulus: z.norm(), radius, degree };
        }
    }
    Sample::Bounded
}

fn generic_orbit(map: &dyn PolyMap<f64>, start: Complex64, max_iter: usize, floor: f64) -> Sample {
    let radius = map.escape_radius().max(floor);
    let r2 = radius * radius;
    let mut z = start;
    if !(norm_sqr(z) < r2) {
        return Sample::Escaped { iter: 0, modulus: z.norm(), radius, degree: map.degree() };
    }
    for k in 1..=max_iter {
        z = map.eval(z);
        if !(norm_sqr(z) < r2) {
            return Sample::Escaped { iter: k, modulus: z.norm(), radius, degree: map.degree() };
        }
    }
    Sample::Bounded
}

const INSIDE: [u8; 3] = [0, 0, 0];
const OUTSIDE: [u8; 3] = [255, 255, 255];

/// `iter + 1 - log(log|z| / log R) / log D`, clamped to `[0, max_iter]`.
pub fn smooth_value(iter: usize, modulus: f64, radius: f64, degree: u32, max_iter: usize) -> f64 {
    let v = iter as f64 + 1.0 - (modulus.ln() / radius.ln()).ln() / (degree as f64).ln();
    v.clamp(0.0, max_iter as f64)
}

/// Piecewise-linear palette cycling every 64 units of smooth value.
fn palette(v: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 4] = [[255.0, 255.0, 255.0], [90.0, 140.0, 220.0], [20.0, 30.0, 90.0], [240.0, 190.0, 60.0]];
    let t = (v / 16.0).rem_euclid(4.0);
    let k = t.floor() as usize;
    let f = t - k as f64;
    let a = STOPS[k % 4];
    let b = STOPS[(k + 1) % 4];
    let mut out = [0u8; 3];
    for ch in 0..3 {
        out[ch] = (a[ch] + (b[ch] - a[ch]) * f).round() as u8;
    }
    out
}

fn verdict_color(outcome: Outcome, reason: Option<Reason>) -> [u8; 3] {
    match (outcome, reason) {
        (Outcome::Accept, _) => [40, 160, 60],
        (Outcome::Reject, Some(Reason::Escaped)) => OUTSIDE,
        (Outcome::Reject, _) => [150, 150, 150],
        (Outcome::Indeterminate, _) => [230, 150, 30],
    }
}

struct PixelResult {
    rgb: [u8; 3],
    exhausted: bool,
}

fn shade(job: &RenderJob, kernel: &Kernel, p: Complex64) -> PixelResult {
    let sample = kernel.sample(p, job.max_iter, job.escape_radius);
    let exhausted = sample == Sample::Bounded;
    let rgb = match (job.coloring, sample) {
        (Coloring::Binary, Sample::Bounded) => INSIDE,
        (Coloring::Binary, Sample::Escaped { .. }) => OUTSIDE,
        (Coloring::SmoothPotential, Sample::Bounded) => INSIDE,
        (Coloring::SmoothPotential, Sample::Escaped { iter, modulus, radius, degree }) => {
            palette(smooth_value(iter, modulus, radius, degree, job.max_iter))
        }
        (Coloring::PmVerdictOverlay, Sample::Escaped { .. }) => OUTSIDE,
        (Coloring::PmVerdictOverlay, Sample::Bounded) => {
            let d = match job.plane {
                Plane::ParameterCbo { d } => d,
                _ => unreachable!("validated"),
            };
            let params = PmParams { max_iter: job.max_iter, ..PmParams::default() };
            match membership_pm(p, d, &params) {
                Ok(v) => verdict_color(v.outcome, v.reason),
                Err(_) => verdict_color(Outcome::Indeterminate, None),
            }
        }
    };
    PixelResult { rgb, exhausted }
}

struct TileOutput {
    x0: u32,
    y0: u32,
    w: u32,
    h: u32,
    rgb: Vec<u8>,
    exhausted: usize,
}

fn render_tile(job: &RenderJob, kernel: &Kernel, x0: u32, y0: u32) -> TileOutput {
    let vp = &job.viewport;
    let w = (TILE as u32).min(vp.px_w - x0);
    let h = (TILE as u32).min(vp.px_h - y0);
    let ss = job.supersample;
    let n = (ss * ss) as u32;
    let mut rgb = Vec::with_capacity((w * h * 3) as usize);
    let mut exhausted = 0;
    for y in y0..y0 + h {
        let j = vp.px_h - 1 - y;
        for x in x0..x0 + w {
            let mut acc = [0u32; 3];
            let mut pixel_exhausted = 0;
            for l in 0..ss {
                for k in 0..ss {
                    let r = shade(job, kernel, vp.sample(x, j, k, l, ss));
                    for ch in 0..3 {
                        acc[ch] += r.rgb[ch] as u32;
                    }
                    pixel_exhausted += r.exhausted as u32;
                }
            }
            for ch in acc {
                rgb.push(((ch + n / 2) / n) as u8);
            }
            if 2 * pixel_exhausted > n {
                exhausted += 1;
            }
        }
    }
    TileOutput { x0, y0, w, h, rgb, exhausted }
}

fn render_in_current_pool(job: &RenderJob) -> Result<RenderOutput, RenderError> {
    job.validate()?;
    let kernel = Kernel::new(&job.plane, job.escape_radius)?;
    let vp = &job.viewport;
    let tiles: Vec<(u32, u32)> = (0..vp.px_h)
        .step_by(TILE)
        .flat_map(|y| (0..vp.px_w).step_by(TILE).map(move |x| (x, y)))
        .collect();
    let outputs: Vec<TileOutput> = tiles.par_iter().map(|&(x, y)| render_tile(job, &kernel, x, y)).collect();

    let mut image = ImageBuffer::new(vp.px_w, vp.px_h);
    let row = vp.px_w as usize * 3;
    let mut exhausted = 0usize;
    for t in &outputs {
        let tw = t.w as usize * 3;
        for r in 0..t.h as usize {
            let dst = (t.y0 as usize + r) * row + t.x0 as usize * 3;
            image.data[dst..dst + tw].copy_from_slice(&t.rgb[r * tw..(r + 1) * tw]);
        }
        exhausted += t.exhausted;
    }
    let mut warnings = Vec::new();
    let fraction = exhausted as f64 / (vp.px_w as f64 * vp.px_h as f64);
    if job.coloring == Coloring::SmoothPotential && fraction > BUDGET_WARNING_FRACTION {
        log::warn!("{:.1}% of pixels used the whole iteration budget", 100.0 * fraction);
        warnings.push(RenderWarning::BudgetTooSmall { fraction });
    }
    Ok(RenderOutput { image, warnings })
}

/// Renders on the global worker pool.
pub fn render(job: &RenderJob) -> Result<RenderOutput, RenderError> {
    render_in_current_pool(job)
}

/// Renders with at most `threads` workers.
pub fn render_with_threads(job: &RenderJob, threads: usize) -> Result<RenderOutput, RenderError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| RenderError::ThreadPool(e.to_string()))?;
    pool.install(|| render_in_current_pool(job))
}

/// Binary PPM (`P6`) bytes.
pub fn ppm_bytes(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn write_ppm(img: &ImageBuffer, path: impl AsRef<Path>) -> io::Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    f.write_all(&ppm_bytes(img))?;
    f.flush()
}

/// Parses a binary PPM with maxval 255 (whitespace-separated header, no
/// comments).
pub fn parse_ppm(bytes: &[u8]) -> Result<ImageBuffer, PpmError> {
    let bad = |m: &str| PpmError::Format(m.to_string());
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
    }
    if fields[0] != "P6" {
        return Err(bad("magic number is not P6"));
    }
    let width: u32 = fields[1].parse().map_err(|_| bad("bad width"))?;
    let height: u32 = fields[2].parse().map_err(|_| bad("bad height"))?;
    if fields[3] != "255" {
        return Err(bad("maxval must be 255"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let len = width as usize * height as usize * 3;
    if bytes.len() < pos + len {
        return Err(bad("raster is truncated"));
    }
    Ok(ImageBuffer { width, height, data: bytes[pos..pos + len].to_vec() })
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<ImageBuffer, PpmError> {
    parse_ppm(&fs::read(path)?)
}

#[cfg(feature = "png")]
pub fn png_bytes(img: &ImageBuffer) -> Result<Vec<u8>, image::ImageError> {
    let mut out = Vec::new();
    let buf = image::RgbImage::from_raw(img.width, img.height, img.data.clone()).expect("buffer size matches");
    buf.write_to(&mut io::Cursor::new(&mut out), image::ImageFormat::Png)?;
    Ok(out)
}

#[cfg(feature = "png")]
pub fn write_png(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<(), image::ImageError> {
    fs::write(path, png_bytes(img)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::in_connectedness_locus;
    use crate::loci::in_multibrot;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn binary(plane: Plane, center: Complex64, width: f64, px: u32, max_iter: usize) -> RenderJob {
        RenderJob {
            max_iter,
            ..RenderJob::new(plane, Viewport::new(center, width, px, px).unwrap(), Coloring::Binary)
        }
    }

    #[test]
    fn pixel_mapping() {
        let v = Viewport::new(c(1.0, -1.0), 4.0, 4, 2).unwrap();
        assert_eq!(v.height(), 2.0);
        assert_eq!(v.pixel(0, 0), c(-0.5, -1.5));
        assert_eq!(v.pixel(3, 1), c(2.5, -0.5));
        for i in 0..4 {
            for j in 0..2 {
                let want = c(
                    1.0 + ((i as f64 + 0.5) / 4.0 - 0.5) * 4.0,
                    -1.0 + ((j as f64 + 0.5) / 2.0 - 0.5) * 2.0,
                );
                assert_eq!(v.pixel(i, j), want);
            }
        }
        let v = Viewport::new(c(0.0, 0.0), 2.0, 1, 1).unwrap();
        assert_eq!(v.sample(0, 0, 0, 0, 2), c(-0.5, -0.5));
        assert_eq!(v.sample(0, 0, 1, 1, 2), c(0.5, 0.5));
    }

    #[test]
    fn invalid_jobs() {
        assert!(Viewport::new(c(0.0, 0.0), 0.0, 4, 4).is_err());
        assert!(Viewport::new(c(0.0, 0.0), 1.0, 0, 4).is_err());
        let mut job = binary(Plane::ParameterCbo { d: 1 }, c(0.0, 0.0), 6.0, 8, 50);
        job.supersample = 3;
        assert!(matches!(render(&job), Err(RenderError::InvalidSupersample(3))));
        let job = RenderJob {
            coloring: Coloring::PmVerdictOverlay,
            ..binary(Plane::ParameterMultibrot { degree: 2 }, c(0.0, 0.0), 4.0, 8, 50)
        };
        assert!(matches!(render(&job), Err(RenderError::InvalidJob(_))));
    }

    #[test]
    fn basilica_pixel_is_interior() {
        let job = RenderJob {
            max_iter: 500,
            ..RenderJob::new(
                Plane::ParameterMultibrot { degree: 2 },
                Viewport::new(c(-1.0, 0.0), 3.0, 1, 1).unwrap(),
                Coloring::Binary,
            )
        };
        assert_eq!(render(&job).unwrap().image.get(0, 0), INSIDE);
    }

    #[test]
    fn disk_raster_of_z_squared() {
        let job = binary(
            Plane::Dynamical { map: DynamicalMap::Unicritical { d: 1, c: c(0.0, 0.0) } },
            c(0.0, 0.0),
            4.0,
            64,
            200,
        );
        let img = render(&job).unwrap().image;
        let vp = job.viewport;
        for y in 0..64 {
            for x in 0..64 {
                let z = vp.pixel(x, 63 - y);
                let inside = img.get(x, y) == INSIDE;
                if (z.norm() - 1.0).abs() > vp.pitch() {
                    assert_eq!(inside, z.norm() < 1.0, "{z}");
                }
            }
        }
    }

    #[test]
    fn cbo_render_agrees_with_connectedness_test() {
        let job = binary(Plane::ParameterCbo { d: 2 }, c(0.0, 0.0), 6.0, 48, 100);
        let img = render(&job).unwrap().image;
        for y in 0..48 {
            for x in 0..48 {
                let a = job.viewport.pixel(x, 47 - y);
                let p = BicriticalOdd::new(2, a).unwrap();
                let inside = in_connectedness_locus(&p, 100, p.escape_radius()).unwrap();
                assert_eq!(img.get(x, y) == INSIDE, inside, "a = {a}");
            }
        }
    }

    #[test]
    fn multibrot_render_agrees_with_membership() {
        let job = binary(Plane::ParameterMultibrot { degree: 3 }, c(0.0, 0.0), 3.0, 40, 100);
        let img = render(&job).unwrap().image;
        for y in 0..40 {
            for x in 0..40 {
                let p = job.viewport.pixel(x, 39 - y);
                assert_eq!(img.get(x, y) == INSIDE, in_multibrot(p, 3, 100), "c = {p}");
            }
        }
    }

    #[test]
    fn symmetric_renders() {
        let job = binary(Plane::ParameterCbo { d: 2 }, c(0.0, 0.0), 6.0, 96, 200);
        let img = render(&job).unwrap().image;
        assert_eq!(img, img.rotated_half_turn());
        assert_eq!(img, img.flipped_vertically());
        let job = binary(Plane::ParameterMultibrot { degree: 5 }, c(0.0, 0.0), 3.0, 96, 200);
        let img = render(&job).unwrap().image;
        assert_eq!(img, img.rotated_quarter_turn());
    }

    #[test]
    fn thread_count_does_not_change_bytes() {
        let job = RenderJob {
            supersample: 2,
            coloring: Coloring::SmoothPotential,
            ..binary(Plane::ParameterCbo { d: 1 }, c(0.3, 0.1), 5.0, 150, 100)
        };
        let one = render_with_threads(&job, 1).unwrap().image;
        let many = render_with_threads(&job, 4).unwrap().image;
        assert_eq!(one, many);
    }

    #[test]
    fn budget_warning() {
        let job = RenderJob {
            coloring: Coloring::SmoothPotential,
            ..binary(Plane::Dynamical { map: DynamicalMap::Unicritical { d: 1, c: c(0.0, 0.0) } }, c(0.0, 0.0), 1.0, 16, 20)
        };
        let out = render(&job).unwrap();
        assert!(matches!(out.warnings[..], [RenderWarning::BudgetTooSmall { .. }]));
    }

    #[test]
    fn ppm_format() {
        let img = ImageBuffer { width: 1, height: 1, data: vec![255, 255, 255] };
        assert_eq!(ppm_bytes(&img), b"P6\n1 1\n255\n\xff\xff\xff".to_vec());
        let img = ImageBuffer { width: 3, height: 2, data: (0..18).collect() };
        assert_eq!(parse_ppm(&ppm_bytes(&img)).unwrap(), img);
        assert!(parse_ppm(b"P3\n1 1\n255\n").is_err());
        assert!(parse_ppm(b"P6\n2 2\n255\n\x00").is_err());
    }

    #[test]
    fn job_json_round_trip() {
        let job = RenderJob::new(
            Plane::Dynamical { map: DynamicalMap::BicriticalOdd { d: 2, a: c(1.5, 0.25) } },
            Viewport::new(c(0.0, 0.0), 4.0, 32, 16).unwrap(),
            Coloring::SmoothPotential,
        );
        let text = serde_json::to_string(&job).unwrap();
        assert!(text.contains("\"kind\":\"dynamical\""));
        assert!(text.contains("\"family\":\"bicritical_odd\""));
        let back: RenderJob = serde_json::from_str(&text).unwrap();
        assert_eq!(back, job);
    }
}
