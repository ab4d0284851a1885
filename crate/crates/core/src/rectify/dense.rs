//! Dense translation pipeline: flow filtering, dual depth maps, occlusion
//! masks and the final global-shutter rendering.
//!
//! Flow fields relate image 1 to image 2 resampled into camera 1's
//! orientation ([`super::warp::orient_second`]); input images are raw.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Correspondence, ImagePoint, Intrinsics, MotionEstimate, RigConfig};
use crate::synth::{project_rs, GenerationMode};

use super::raster::{DepthMap, FlowField, OcclusionMask, Raster, Source};
use super::triangulate::triangulate_rowpair;

/// Half-width of the centre band as a fraction of the image height.
pub const CENTER_BAND_FRACTION: f64 = 0.05;
/// Depths within this relative margin are treated as the same surface.
pub const DEPTH_AGREEMENT: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowFilterConfig {
    /// Maximum forward-backward round-trip error, px.
    pub consistency_px: f64,
    /// Flow magnitude allowed at the middle row, px.
    pub gate_base_px: f64,
    /// Growth of the allowed magnitude per row away from the middle, px.
    /// `None` disables the gate.
    pub gate_slope: Option<f64>,
}

impl Default for FlowFilterConfig {
    fn default() -> Self {
        Self {
            consistency_px: 1.0,
            gate_base_px: 2.0,
            gate_slope: Some(0.5),
        }
    }
}

/// Centre band half-width in pixel rows.
pub fn center_band_px(height: usize) -> f64 {
    CENTER_BAND_FRACTION * height as f64
}

fn in_band(y: usize, intr: &Intrinsics, band_px: f64) -> bool {
    (y as f64 - intr.cy).abs() < band_px
}

/// Invalidates forward flow that does not return to its start through the
/// backward flow, or that exceeds the row gate. Returns the filtered
/// forward flow.
pub fn filter_flow(flow12: &FlowField, flow21: &FlowField, cfg: &FlowFilterConfig) -> Result<FlowField> {
    if flow12.width != flow21.width || flow12.height != flow21.height {
        return Err(Error::DimensionMismatch(format!(
            "flows {}x{} and {}x{}",
            flow12.width, flow12.height, flow21.width, flow21.height
        )));
    }
    let (w, h) = (flow12.width, flow12.height);
    let mid = (h as f64 - 1.0) / 2.0;
    let mut out = flow12.clone();
    for y in 0..h {
        for x in 0..w {
            let Some(f) = flow12.get(x, y) else { continue };
            let (fx, fy) = (f[0] as f64, f[1] as f64);
            let gated = cfg
                .gate_slope
                .is_some_and(|s| fx.hypot(fy) > cfg.gate_base_px + s * (y as f64 - mid).abs());
            let consistent = flow21
                .bilinear(x as f64 + fx, y as f64 + fy)
                .is_some_and(|b| (fx + b[0]).hypot(fy + b[1]) <= cfg.consistency_px);
            if gated || !consistent {
                out.invalidate(x, y);
            }
        }
    }
    Ok(out)
}

/// Raw camera-2 normalized point of a pixel in the oriented image 2.
fn raw_second(rig: &RigConfig, intr: &Intrinsics, px: f64, py: f64) -> Option<ImagePoint> {
    let q = intr.to_normalized(px, py);
    ImagePoint::from_homogeneous(&(rig.relative_rotation * q.homogeneous()))
}

fn splat_depth(map: &mut DepthMap, intr: &Intrinsics, band_px: f64, x: &Vector3<f64>) {
    let (px, py) = intr.to_pixel(&ImagePoint::new(x.x / x.z, x.y / x.z));
    if !(px > -1.0 && py > -1.0 && px < map.width as f64 && py < map.height as f64) {
        return;
    }
    // 2x2 footprint so that slight magnification leaves no holes
    let (x0, y0) = (px.floor(), py.floor());
    for (dx, dy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
        let (xi, yi) = (x0 + dx, y0 + dy);
        if xi < 0.0 || yi < 0.0 || xi >= map.width as f64 || yi >= map.height as f64 {
            continue;
        }
        let (xi, yi) = (xi as usize, yi as usize);
        if in_band(yi, intr, band_px) {
            continue;
        }
        map.splat_nearest(yi * map.width + xi, x.z);
    }
}

/// Triangulates every valid flow vector with the poses of its two rows and
/// writes the depth at the point's GS pixel. Rows of the centre band, and
/// pairs closer in time than the band, stay invalid.
pub fn build_depth_maps(
    flow12: &FlowField,
    flow21: &FlowField,
    motion: &MotionEstimate,
    rig: &RigConfig,
    intr: &Intrinsics,
) -> Result<(DepthMap, DepthMap)> {
    if flow12.width != flow21.width || flow12.height != flow21.height {
        return Err(Error::DimensionMismatch("flow fields differ in size".into()));
    }
    let (w, h) = (flow12.width, flow12.height);
    let band = center_band_px(h);
    let min_gap = 2.0 * band / intr.focal;
    let triangulate = |flow: &FlowField, forward: bool| -> Vec<Vector3<f64>> {
        (0..h)
            .into_par_iter()
            .flat_map_iter(|y| {
                (0..w).filter_map(move |x| {
                    let f = flow.get(x, y)?;
                    let (qx, qy) = (x as f64 + f[0] as f64, y as f64 + f[1] as f64);
                    let corr = if forward {
                        Correspondence::new(intr.to_normalized(x as f64, y as f64), raw_second(rig, intr, qx, qy)?)
                    } else {
                        Correspondence::new(intr.to_normalized(qx, qy), raw_second(rig, intr, x as f64, y as f64)?)
                    };
                    triangulate_rowpair(&corr, motion, rig, min_gap).ok()
                })
            })
            .collect()
    };
    let mut maps = (DepthMap::empty(w, h), DepthMap::empty(w, h));
    for p in triangulate(flow12, true) {
        splat_depth(&mut maps.0, intr, band, &p);
    }
    for p in triangulate(flow21, false) {
        splat_depth(&mut maps.1, intr, band, &p);
    }
    Ok(maps)
}

/// Z-buffer rule per pixel: the nearer source wins, depths within
/// [`DEPTH_AGREEMENT`] allow both, a lone valid depth allows its source.
pub fn build_occlusion_masks(d1: &DepthMap, d2: &DepthMap) -> Result<(OcclusionMask, OcclusionMask)> {
    if d1.width != d2.width || d1.height != d2.height {
        return Err(Error::DimensionMismatch("depth maps differ in size".into()));
    }
    let n = d1.depth.len();
    let mut m1 = vec![false; n];
    let mut m2 = vec![false; n];
    for i in 0..n {
        let (a, b) = (d1.depth[i], d2.depth[i]);
        match (a > 0.0, b > 0.0) {
            (true, true) => {
                if (a - b).abs() <= DEPTH_AGREEMENT * a.min(b) {
                    m1[i] = true;
                    m2[i] = true;
                } else if a < b {
                    m1[i] = true;
                } else {
                    m2[i] = true;
                }
            }
            (true, false) => m1[i] = true,
            (false, true) => m2[i] = true,
            (false, false) => {}
        }
    }
    let mk = |allowed| OcclusionMask {
        width: d1.width,
        height: d1.height,
        allowed,
    };
    Ok((mk(m1), mk(m2)))
}

/// Per pixel, the nearer of the two depths.
pub fn fuse_depths(d1: &DepthMap, d2: &DepthMap) -> Result<DepthMap> {
    if d1.width != d2.width || d1.height != d2.height {
        return Err(Error::DimensionMismatch("depth maps differ in size".into()));
    }
    let mut out = DepthMap::empty(d1.width, d1.height);
    for i in 0..d1.depth.len() {
        out.splat_nearest(i, d1.depth[i]);
        out.splat_nearest(i, d2.depth[i]);
    }
    Ok(out)
}

/// How a rendered pixel was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum RenderFlag {
    Invalid = 0,
    Geometry = 1,
    /// Centre band: interpolation of the two inputs.
    Interpolated = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: Raster,
    pub flags: Vec<RenderFlag>,
    /// Source actually used per pixel.
    pub sources: Vec<Source>,
}

/// Back-projects every fused depth, reprojects the point into the allowed
/// source images through the rolling-shutter model and samples them. The
/// centre band averages image 1 with the oriented image 2 at the same pixel.
#[allow(clippy::too_many_arguments)]
pub fn render_gs_translation(
    img1: &Raster,
    img2: &Raster,
    fused: &DepthMap,
    masks: (&OcclusionMask, &OcclusionMask),
    motion: &MotionEstimate,
    rig: &RigConfig,
    intr: &Intrinsics,
) -> Result<Rendered> {
    let (w, h, c) = (img1.width, img1.height, img1.channels);
    if !img1.same_shape(img2) || fused.width != w || fused.height != h || masks.0.allowed.len() != w * h || masks.1.allowed.len() != w * h {
        return Err(Error::DimensionMismatch("render inputs differ in size".into()));
    }
    let band = center_band_px(h);
    type Row = (Vec<f32>, Vec<RenderFlag>, Vec<Source>);
    let rows: Vec<Row> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut data = vec![0.0f32; w * c];
            let mut flags = vec![RenderFlag::Invalid; w];
            let mut sources = vec![Source::None; w];
            let (mut a, mut b) = (vec![0.0f32; c], vec![0.0f32; c]);
            for x in 0..w {
                let out = &mut data[x * c..(x + 1) * c];
                let g = intr.to_normalized(x as f64, y as f64);
                if in_band(y, intr, band) {
                    let ok1 = img1.bilinear(x as f64, y as f64, &mut a);
                    let ok2 = raw_second(rig, intr, x as f64, y as f64)
                        .map(|p| intr.to_pixel(&p))
                        .is_some_and(|(px, py)| img2.bilinear(px, py, &mut b));
                    let src = blend(ok1, ok2, &a, &b, out);
                    if src != Source::None {
                        flags[x] = RenderFlag::Interpolated;
                        sources[x] = src;
                    }
                    continue;
                }
                let i = y * w + x;
                let Some(depth) = fused.get(x, y) else { continue };
                let allowed = OcclusionMask::source(masks.0, masks.1, i);
                if allowed == Source::None {
                    continue;
                }
                let xw = g.homogeneous() * depth;
                let Ok((p1, p2)) = project_rs(&xw, motion, rig, GenerationMode::Exact) else { continue };
                let ok1 = matches!(allowed, Source::Img1 | Source::Both) && {
                    let (px, py) = intr.to_pixel(&p1);
                    img1.bilinear(px, py, &mut a)
                };
                let ok2 = matches!(allowed, Source::Img2 | Source::Both) && {
                    let (px, py) = intr.to_pixel(&p2);
                    img2.bilinear(px, py, &mut b)
                };
                let src = blend(ok1, ok2, &a, &b, out);
                if src != Source::None {
                    flags[x] = RenderFlag::Geometry;
                    sources[x] = src;
                }
            }
            (data, flags, sources)
        })
        .collect();
    let mut image = Raster::new(w, h, c)?;
    let mut flags = Vec::with_capacity(w * h);
    let mut sources = Vec::with_capacity(w * h);
    for (y, (d, f, s)) in rows.into_iter().enumerate() {
        image.data[y * w * c..(y + 1) * w * c].copy_from_slice(&d);
        for (x, fl) in f.iter().enumerate() {
            image.valid[y * w + x] = *fl != RenderFlag::Invalid;
        }
        flags.extend(f);
        sources.extend(s);
    }
    Ok(Rendered { image, flags, sources })
}

fn blend(ok1: bool, ok2: bool, a: &[f32], b: &[f32], out: &mut [f32]) -> Source {
    match (ok1, ok2) {
        (true, true) => {
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o = 0.5 * (x + y);
            }
            Source::Both
        }
        (true, false) => {
            out.copy_from_slice(a);
            Source::Img1
        }
        (false, true) => {
            out.copy_from_slice(b);
            Source::Img2
        }
        (false, false) => Source::None,
    }
}
