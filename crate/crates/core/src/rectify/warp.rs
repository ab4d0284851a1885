//! Rotation-only image warping between rolling-shutter and global-shutter
//! geometry.
//!
//! Output images live in camera 1's global-shutter frame. A source pixel at
//! normalized row `v` of camera `c` sees the GS direction `M_c(v)ᵀ u`, with
//! `M_1(v) = R_ω(τ)` and `M_2(v) = R_r R_ω(τ)`. The map depends on the source
//! row only, so every source row moves by one homography.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{rotation_from_axis_angle, Intrinsics, RigConfig};

use super::raster::{bilinear_weights, Raster};

/// Fixed-point iteration cap of the backward warp.
pub const WARP_MAX_ITERATIONS: usize = 20;
/// Row convergence of the backward warp, in pixel rows.
pub const WARP_ROW_TOLERANCE_PX: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Camera {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarpDirection {
    /// Splat every source pixel at its GS position.
    Forward,
    /// Per output pixel, solve for the source row and sample.
    Backward,
}

/// Source-row map `M_c(v)`.
pub fn row_map(camera: Camera, omega: &Vector3<f64>, rig: &RigConfig, v: f64) -> Matrix3<f64> {
    let r = rotation_from_axis_angle(omega, rig.time(v));
    match camera {
        Camera::First => r,
        Camera::Second => rig.relative_rotation * r,
    }
}

fn project(p: &Vector3<f64>) -> Option<(f64, f64)> {
    (p.z > 0.0).then(|| (p.x / p.z, p.y / p.z))
}

/// Source position (normalized) of GS direction `g`, or `None` if the
/// iteration does not settle.
pub fn backward_source(
    camera: Camera,
    omega: &Vector3<f64>,
    rig: &RigConfig,
    g: &Vector3<f64>,
    tolerance: f64,
) -> Option<(f64, f64)> {
    // start at the row the camera would see without motion; a plain
    // fixed-point step, then secant steps on g(v) - v
    let eval = |v: f64| project(&(row_map(camera, omega, rig, v) * g));
    let (_, mut v) = project(&(row_map(camera, &Vector3::zeros(), rig, 0.0) * g))?;
    let (mut v_prev, mut h_prev) = (f64::NAN, f64::NAN);
    for _ in 0..WARP_MAX_ITERATIONS {
        let (u, gv) = eval(v)?;
        let h = gv - v;
        if h.abs() <= tolerance {
            return Some((u, gv));
        }
        let mut next = gv;
        if h_prev.is_finite() && h != h_prev {
            let s = v - h * (v - v_prev) / (h - h_prev);
            if s.is_finite() && (s - v).abs() <= 10.0 * h.abs() {
                next = s;
            }
        }
        v_prev = v;
        h_prev = h;
        v = next;
    }
    None
}

/// Rounds away the pixel/normalized round-trip error so that identity maps
/// sample exactly.
fn snap(p: f64) -> f64 {
    let r = p.round();
    if (p - r).abs() < 1e-9 {
        r
    } else {
        p
    }
}

fn gather<F>(src: &Raster, intr: &Intrinsics, f: F) -> Raster
where
    F: Fn(&Vector3<f64>) -> Option<(f64, f64)> + Sync,
{
    let (w, h, c) = (src.width, src.height, src.channels);
    let rows: Vec<(Vec<f32>, Vec<bool>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut data = vec![0.0f32; w * c];
            let mut valid = vec![false; w];
            for x in 0..w {
                let g = intr.to_normalized(x as f64, y as f64).homogeneous();
                let Some((u, v)) = f(&g) else { continue };
                let (px, py) = (snap(u * intr.focal + intr.cx), snap(v * intr.focal + intr.cy));
                valid[x] = src.bilinear(px, py, &mut data[x * c..(x + 1) * c]);
            }
            (data, valid)
        })
        .collect();
    let mut out = Raster::new(w, h, c).expect("source raster has a valid shape");
    for (y, (data, valid)) in rows.into_iter().enumerate() {
        out.data[y * w * c..(y + 1) * w * c].copy_from_slice(&data);
        out.valid[y * w..(y + 1) * w].copy_from_slice(&valid);
    }
    out
}

/// Rolling-shutter image of camera `camera` mapped into camera 1's GS frame.
pub fn warp_image_rotation(
    img: &Raster,
    omega: &Vector3<f64>,
    rig: &RigConfig,
    intr: &Intrinsics,
    camera: Camera,
    direction: WarpDirection,
) -> Raster {
    match direction {
        WarpDirection::Backward => {
            let tol = WARP_ROW_TOLERANCE_PX / intr.focal;
            gather(img, intr, |g| backward_source(camera, omega, rig, g, tol))
        }
        WarpDirection::Forward => splat(img, omega, rig, intr, camera),
    }
}

fn splat(img: &Raster, omega: &Vector3<f64>, rig: &RigConfig, intr: &Intrinsics, camera: Camera) -> Raster {
    let (w, h, c) = (img.width, img.height, img.channels);
    let mut acc = vec![0.0f64; w * h * c];
    let mut weight = vec![0.0f64; w * h];
    // rows in order; no depth test
    for y in 0..h {
        let v = (y as f64 - intr.cy) / intr.focal;
        let m = row_map(camera, omega, rig, v).transpose();
        for x in 0..w {
            if !img.valid[y * w + x] {
                continue;
            }
            let u = intr.to_normalized(x as f64, y as f64).homogeneous();
            let Some((gu, gv)) = project(&(m * u)) else { continue };
            let (px, py) = (gu * intr.focal + intr.cx, gv * intr.focal + intr.cy);
            let Some((idx, wts)) = bilinear_weights(w, h, px, py) else { continue };
            let s = img.pixel(x, y);
            for (&k, &wk) in idx.iter().zip(wts.iter()) {
                if wk <= 0.0 {
                    continue;
                }
                weight[k] += wk;
                for ch in 0..c {
                    acc[k * c + ch] += wk * s[ch] as f64;
                }
            }
        }
    }
    let mut out = Raster::new(w, h, c).expect("source raster has a valid shape");
    for k in 0..w * h {
        if weight[k] >= 0.1 {
            out.valid[k] = true;
            for ch in 0..c {
                out.data[k * c + ch] = (acc[k * c + ch] / weight[k]) as f32;
            }
        }
    }
    out
}

/// Inverse of the backward warp: renders camera `camera`'s rolling-shutter
/// image from an image in camera 1's GS frame. Direct, no iteration.
pub fn distort_image_rotation(
    gs: &Raster,
    omega: &Vector3<f64>,
    rig: &RigConfig,
    intr: &Intrinsics,
    camera: Camera,
) -> Raster {
    gather(gs, intr, |u| {
        let v = u.y / u.z;
        project(&(row_map(camera, omega, rig, v).transpose() * u))
    })
}

/// Camera 2's image resampled into camera 1's orientation (GS, no motion).
pub fn orient_second(img2: &Raster, rig: &RigConfig, intr: &Intrinsics) -> Raster {
    let rr = rig.relative_rotation;
    gather(img2, intr, |g| project(&(rr * g)))
}

/// Average where both inputs are valid, copy where one is.
pub fn fuse_warped(a: &Raster, b: &Raster) -> Result<Raster> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        )));
    }
    let c = a.channels;
    let mut out = Raster::new(a.width, a.height, c)?;
    for p in 0..a.len() {
        let (va, vb) = (a.valid[p], b.valid[p]);
        if !(va || vb) {
            continue;
        }
        out.valid[p] = true;
        for ch in 0..c {
            let k = p * c + ch;
            out.data[k] = match (va, vb) {
                (true, true) => 0.5 * (a.data[k] + b.data[k]),
                (true, false) => a.data[k],
                _ => b.data[k],
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rectify::raster::psnr;
    use crate::synth::render::{render_gs_rotation, render_rs_rotation, Texture};

    const W: usize = 192;
    const H: usize = 128;

    fn setup() -> (Intrinsics, RigConfig, Texture) {
        let intr = Intrinsics::centered(125.0, W, H);
        (intr, RigConfig::mirrored(), Texture::random(11, 1, 125.0, 10.0))
    }

    /// Angular velocity of `deg` per frame about `axis`, per normalized row.
    fn omega(deg: f64, axis: Vector3<f64>, intr: &Intrinsics) -> Vector3<f64> {
        axis.normalize() * deg.to_radians() / (H as f64 / intr.focal)
    }

    fn interior(margin: usize) -> Vec<bool> {
        (0..W * H)
            .map(|i| {
                let (x, y) = (i % W, i / W);
                x >= margin && y >= margin && x < W - margin && y < H - margin
            })
            .collect()
    }

    #[test]
    fn zero_rotation_is_the_identity() {
        let (intr, rig, tex) = setup();
        let img = render_gs_rotation(&tex, &intr, W, H).unwrap();
        let out = warp_image_rotation(&img, &Vector3::zeros(), &rig, &intr, Camera::First, WarpDirection::Backward);
        assert_eq!(out, img);
        let fwd = warp_image_rotation(&img, &Vector3::zeros(), &rig, &intr, Camera::First, WarpDirection::Forward);
        for p in 0..img.len() {
            if fwd.valid[p] {
                assert!((fwd.data[p] - img.data[p]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn warp_and_inverse_warp_round_trip() {
        let (intr, rig, tex) = setup();
        let gs = render_gs_rotation(&tex, &intr, W, H).unwrap();
        for (k, axis) in [Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.3, -0.5, 0.8)]
            .into_iter()
            .enumerate()
        {
            for deg in [5.0, 15.0] {
                let w = omega(deg, axis, &intr);
                let rs = distort_image_rotation(&gs, &w, &rig, &intr, Camera::First);
                let back = warp_image_rotation(&rs, &w, &rig, &intr, Camera::First, WarpDirection::Backward);
                let q = psnr(&back, &gs, Some(&interior(4))).unwrap();
                assert!(q >= 40.0, "axis {k} {deg} deg: {q} dB");
                assert!(back.coverage() > W * H / 2);
            }
        }
    }

    #[test]
    fn rendered_rolling_shutter_images_undistort_to_the_gs_view() {
        let (intr, rig, tex) = setup();
        let gs = render_gs_rotation(&tex, &intr, W, H).unwrap();
        let w = omega(15.0, Vector3::new(0.2, 1.0, 0.1), &intr);
        for cam in [Camera::First, Camera::Second] {
            let rs = render_rs_rotation(&tex, &w, &rig, &intr, cam, W, H).unwrap();
            for dir in [WarpDirection::Backward, WarpDirection::Forward] {
                let out = warp_image_rotation(&rs, &w, &rig, &intr, cam, dir);
                let q = psnr(&out, &gs, Some(&interior(4))).unwrap();
                assert!(q >= 35.0, "{cam:?} {dir:?}: {q} dB");
            }
        }
    }

    #[test]
    fn backward_iteration_converges_for_large_rotations() {
        let (intr, rig, _) = setup();
        let frame = H as f64 / intr.focal;
        let tol = WARP_ROW_TOLERANCE_PX / intr.focal;
        for axis in [Vector3::x(), Vector3::y(), Vector3::z(), Vector3::new(1.0, 1.0, 1.0)] {
            let w = axis.normalize() * 0.5 / frame;
            for y in (0..H).step_by(7) {
                for x in (0..W).step_by(7) {
                    let g = intr.to_normalized(x as f64, y as f64).homogeneous();
                    let (u, v) = backward_source(Camera::First, &w, &rig, &g, tol).expect("converges");
                    // the source row's own map sends it back to g
                    let back = row_map(Camera::First, &w, &rig, v).transpose() * Vector3::new(u, v, 1.0);
                    assert!((back / back.z - g).norm() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn rows_move_by_one_homography() {
        let (intr, rig, _) = setup();
        let w = omega(20.0, Vector3::new(0.4, 0.9, 0.2), &intr);
        let tol = 1e-12;
        // two GS pixels whose solved sources share a row map through the same matrix
        let g1 = intr.to_normalized(30.0, 20.0).homogeneous();
        let (u1, v1) = backward_source(Camera::First, &w, &rig, &g1, tol).unwrap();
        let m = row_map(Camera::First, &w, &rig, v1);
        let u2 = Vector3::new(u1 + 0.3, v1, 1.0);
        let g2 = m.transpose() * u2;
        let (su, sv) = backward_source(Camera::First, &w, &rig, &(g2 / g2.z), tol).unwrap();
        assert!((su - u2.x).abs() < 1e-9 && (sv - v1).abs() < 1e-9);
    }

    #[test]
    fn fusion_rules() {
        let a = Raster::from_data(2, 1, 1, vec![0.2, 0.4]).unwrap();
        assert_eq!(fuse_warped(&a, &a).unwrap(), a);
        let mut l = a.clone();
        l.valid[1] = false;
        let mut r = a.clone();
        r.valid[0] = false;
        r.data[0] = 0.9;
        let f = fuse_warped(&l, &r).unwrap();
        assert_eq!(f.coverage(), 2);
        assert_eq!(f.data, vec![0.2, 0.4]);
        let b = Raster::from_data(2, 1, 1, vec![0.4, 0.0]).unwrap();
        assert!((fuse_warped(&a, &b).unwrap().data[0] - 0.3).abs() < 1e-7);
        let c = Raster::from_data(1, 2, 1, vec![0.0, 0.0]).unwrap();
        assert!(matches!(fuse_warped(&a, &c), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn fused_coverage_is_at_least_each_input() {
        let (intr, rig, tex) = setup();
        let w = omega(15.0, Vector3::new(0.0, 1.0, 0.3), &intr);
        let r1 = render_rs_rotation(&tex, &w, &rig, &intr, Camera::First, W, H).unwrap();
        let r2 = render_rs_rotation(&tex, &w, &rig, &intr, Camera::Second, W, H).unwrap();
        let a = warp_image_rotation(&r1, &w, &rig, &intr, Camera::First, WarpDirection::Backward);
        let b = warp_image_rotation(&r2, &w, &rig, &intr, Camera::Second, WarpDirection::Backward);
        let f = fuse_warped(&a, &b).unwrap();
        assert!(f.coverage() >= a.coverage().max(b.coverage()));
        assert!(f.coverage() > a.coverage().min(b.coverage()));
    }

    #[test]
    fn orienting_camera_two_flips_the_image() {
        let (intr, rig, _) = setup();
        let data: Vec<f32> = (0..W * H).map(|i| i as f32 / (W * H) as f32).collect();
        let img = Raster::from_data(W, H, 1, data).unwrap();
        let o = orient_second(&img, &rig, &intr);
        assert_eq!(o.pixel(0, 0), img.pixel(W - 1, H - 1));
        assert_eq!(o.pixel(5, 9), img.pixel(W - 6, H - 10));
    }
}
