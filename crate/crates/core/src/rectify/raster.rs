//! Dense per-pixel containers.

use crate::error::{Error, Result};

/// Row-major image with 1 or 3 channels, samples in `[0, 1]`, and a
/// per-pixel validity flag (alpha).
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
    pub valid: Vec<bool>,
}

impl Raster {
    /// All-zero, all-invalid image.
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        if width == 0 || height == 0 || !(channels == 1 || channels == 3) {
            return Err(Error::InvalidArgument(format!(
                "raster {width}x{height} with {channels} channels"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
            valid: vec![false; width * height],
        })
    }

    /// Builds a fully valid image from samples; values must be finite.
    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let mut r = Self::new(width, height, channels)?;
        if data.len() != r.data.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples, got {}",
                r.data.len(),
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        r.data = data;
        r.valid.fill(true);
        Ok(r)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, value: &[f32]) {
        let i = (y * self.width + x) * self.channels;
        self.data[i..i + self.channels].copy_from_slice(value);
        self.valid[y * self.width + x] = true;
    }

    pub fn coverage(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Bilinear sample at pixel coordinates; `None` outside the image or when
    /// any contributing pixel is invalid.
    pub fn bilinear(&self, x: f64, y: f64, out: &mut [f32]) -> bool {
        let Some((i, w)) = bilinear_weights(self.width, self.height, x, y) else {
            return false;
        };
        if i.iter().zip(w.iter()).any(|(&k, &wk)| wk > 0.0 && !self.valid[k]) {
            return false;
        }
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            let mut s = 0.0f64;
            for (&k, &wk) in i.iter().zip(w.iter()) {
                if wk > 0.0 {
                    s += wk * self.data[k * self.channels + c] as f64;
                }
            }
            *o = s as f32;
        }
        true
    }
}

/// Indices and weights of the 2x2 neighbourhood of `(x, y)`.
pub(crate) fn bilinear_weights(width: usize, height: usize, x: f64, y: f64) -> Option<([usize; 4], [f64; 4])> {
    if !(x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64) {
        return None;
    }
    let x0 = (x.floor() as usize).min(width - 1);
    let y0 = (y.floor() as usize).min(height - 1);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let ax = x - x0 as f64;
    let ay = y - y0 as f64;
    Some((
        [y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1],
        [(1.0 - ax) * (1.0 - ay), ax * (1.0 - ay), (1.0 - ax) * ay, ax * ay],
    ))
}

/// Peak signal-to-noise ratio in dB over pixels valid in both images and
/// selected by `mask` (all when `None`). Infinite for identical images,
/// NaN when no pixel qualifies.
pub fn psnr(a: &Raster, b: &Raster, mask: Option<&[bool]>) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch("psnr of differently shaped rasters".into()));
    }
    let mut se = 0.0f64;
    let mut n = 0usize;
    for p in 0..a.len() {
        if !(a.valid[p] && b.valid[p]) || mask.is_some_and(|m| !m[p]) {
            continue;
        }
        for c in 0..a.channels {
            let d = (a.data[p * a.channels + c] - b.data[p * b.channels + c]) as f64;
            se += d * d;
        }
        n += a.channels;
    }
    if n == 0 {
        return Ok(f64::NAN);
    }
    Ok(10.0 * (1.0 / (se / n as f64)).log10())
}

/// Dense displacement field in pixels; a NaN pair marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![[f32::NAN; 2]; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Option<[f32; 2]> {
        let f = self.data[y * self.width + x];
        (f[0].is_finite() && f[1].is_finite()).then_some(f)
    }

    pub fn set(&mut self, x: usize, y: usize, f: [f32; 2]) {
        self.data[y * self.width + x] = f;
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        self.data[y * self.width + x] = [f32::NAN; 2];
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|f| f[0].is_finite() && f[1].is_finite()).count()
    }

    /// Bilinear sample; every contributing pixel must be valid.
    pub fn bilinear(&self, x: f64, y: f64) -> Option<[f64; 2]> {
        let (i, w) = bilinear_weights(self.width, self.height, x, y)?;
        let mut s = [0.0; 2];
        for (&k, &wk) in i.iter().zip(w.iter()) {
            if wk == 0.0 {
                continue;
            }
            let f = self.data[k];
            if !(f[0].is_finite() && f[1].is_finite()) {
                return None;
            }
            s[0] += wk * f[0] as f64;
            s[1] += wk * f[1] as f64;
        }
        Some(s)
    }
}

/// Per-pixel depth `X_3`; zero marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
}

impl DepthMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![0.0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let d = self.depth[y * self.width + x];
        (d > 0.0).then_some(d)
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|d| **d > 0.0).count()
    }

    /// Keeps the nearer of the current value and `d`.
    pub fn splat_nearest(&mut self, index: usize, d: f64) {
        let cur = self.depth[index];
        if d > 0.0 && d.is_finite() && (cur <= 0.0 || d < cur) {
            self.depth[index] = d;
        }
    }
}

/// Which input images may supply a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Img1,
    Img2,
    /// Depths agree: average both.
    Both,
    None,
}

/// Per-pixel permission for one input image.
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionMask {
    pub width: usize,
    pub height: usize,
    pub allowed: Vec<bool>,
}

impl OcclusionMask {
    pub fn source(m1: &OcclusionMask, m2: &OcclusionMask, index: usize) -> Source {
        match (m1.allowed[index], m2.allowed[index]) {
            (true, true) => Source::Both,
            (true, false) => Source::Img1,
            (false, true) => Source::Img2,
            (false, false) => Source::None,
        }
    }

    pub fn count(&self) -> usize {
        self.allowed.iter().filter(|a| **a).count()
    }
}
