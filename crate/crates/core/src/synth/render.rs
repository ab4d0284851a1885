//! Procedural textured scenes rendered through the rolling-shutter model,
//! with exact dense flow.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{rotation_from_axis_angle, ImagePoint, Intrinsics, MotionEstimate, RigConfig};
use crate::rectify::raster::{FlowField, Raster};
use crate::rectify::warp::{row_map, Camera};

use super::{project_rs, GenerationMode};

/// Smooth random texture on a plane: a sum of sinusoids per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    /// `(kx, ky, phase, amplitude)` per channel.
    pub waves: Vec<Vec<(f64, f64, f64, f64)>>,
}

impl Texture {
    /// Wavelengths between `min_period_px` and four times that at the given
    /// focal length, so that bilinear resampling stays accurate.
    pub fn random(seed: u64, channels: usize, focal: f64, min_period_px: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..channels)
            .map(|_| {
                (0..6)
                    .map(|_| {
                        let period = rng.random_range(min_period_px..4.0 * min_period_px) / focal;
                        let dir: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                        let k = std::f64::consts::TAU / period;
                        (k * dir.cos(), k * dir.sin(), rng.random_range(0.0..std::f64::consts::TAU), 0.07)
                    })
                    .collect()
            })
            .collect();
        Self { waves }
    }

    pub fn channels(&self) -> usize {
        self.waves.len()
    }

    pub fn sample(&self, x: f64, y: f64, out: &mut [f32]) {
        for (o, ws) in out.iter_mut().zip(&self.waves) {
            let s: f64 = ws.iter().map(|(kx, ky, ph, a)| a * (kx * x + ky * y + ph).sin()).sum();
            *o = (0.5 + s) as f32;
        }
    }
}

fn render<F>(width: usize, height: usize, channels: usize, f: F) -> Result<Raster>
where
    F: Fn(usize, usize, &mut [f32]) -> bool + Sync,
{
    let mut out = Raster::new(width, height, channels)?;
    let rows: Vec<(Vec<f32>, Vec<bool>)> = (0..height)
        .into_par_iter()
        .map(|y| {
            let mut data = vec![0.0f32; width * channels];
            let mut valid = vec![false; width];
            for x in 0..width {
                valid[x] = f(x, y, &mut data[x * channels..(x + 1) * channels]);
            }
            (data, valid)
        })
        .collect();
    for (y, (d, v)) in rows.into_iter().enumerate() {
        out.data[y * width * channels..(y + 1) * width * channels].copy_from_slice(&d);
        out.valid[y * width..(y + 1) * width].copy_from_slice(&v);
    }
    Ok(out)
}

/// Camera 1's GS view of a texture at infinity.
pub fn render_gs_rotation(tex: &Texture, intr: &Intrinsics, width: usize, height: usize) -> Result<Raster> {
    render(width, height, tex.channels(), |x, y, out| {
        let p = intr.to_normalized(x as f64, y as f64);
        tex.sample(p.u, p.v, out);
        true
    })
}

/// Rolling-shutter view of a texture at infinity under rotation `omega`.
pub fn render_rs_rotation(
    tex: &Texture,
    omega: &Vector3<f64>,
    rig: &RigConfig,
    intr: &Intrinsics,
    camera: Camera,
    width: usize,
    height: usize,
) -> Result<Raster> {
    render(width, height, tex.channels(), |x, y, out| {
        let p = intr.to_normalized(x as f64, y as f64);
        let g = row_map(camera, omega, rig, p.v).transpose() * p.homogeneous();
        if g.z <= 0.0 {
            return false;
        }
        tex.sample(g.x / g.z, g.y / g.z, out);
        true
    })
}

/// Textured plane `n·X = d` in camera 1's GS frame; the texture coordinate
/// of a point is `(X_1, X_2) / d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneScene {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub texture: Texture,
}

impl PlaneScene {
    pub fn fronto_parallel(depth: f64, texture: Texture) -> Self {
        Self {
            normal: Vector3::z(),
            offset: depth,
            texture,
        }
    }

    /// First intersection of the ray `o + s d`, `s > 0`.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Vector3<f64>> {
        let den = self.normal.dot(dir);
        if den.abs() < 1e-15 {
            return None;
        }
        let s = (self.offset - self.normal.dot(origin)) / den;
        (s > 0.0).then(|| origin + dir * s)
    }

    fn shade(&self, x: &Vector3<f64>, out: &mut [f32]) {
        self.texture.sample(x.x / self.offset, x.y / self.offset, out);
    }

    /// Plane point seen by `camera` at normalized pixel `p` (raw frame).
    pub fn point_seen(&self, p: &ImagePoint, motion: &MotionEstimate, rig: &RigConfig, camera: Camera) -> Option<Vector3<f64>> {
        let tau = rig.time(p.v);
        let r = rotation_from_axis_angle(&motion.omega, tau);
        let (origin, dir) = match camera {
            Camera::First => (-(r.transpose() * (motion.t * tau)), r.transpose() * p.homogeneous()),
            Camera::Second => (
                -(r.transpose() * (motion.t * tau + rig.baseline)),
                r.transpose() * (rig.relative_rotation.transpose() * p.homogeneous()),
            ),
        };
        self.intersect(&origin, &dir)
    }

    pub fn render_gs(&self, intr: &Intrinsics, width: usize, height: usize) -> Result<Raster> {
        render(width, height, self.texture.channels(), |x, y, out| {
            let p = intr.to_normalized(x as f64, y as f64).homogeneous();
            match self.intersect(&Vector3::zeros(), &p) {
                Some(xw) => {
                    self.shade(&xw, out);
                    true
                }
                None => false,
            }
        })
    }

    pub fn render_rs(
        &self,
        motion: &MotionEstimate,
        rig: &RigConfig,
        intr: &Intrinsics,
        camera: Camera,
        width: usize,
        height: usize,
    ) -> Result<Raster> {
        render(width, height, self.texture.channels(), |x, y, out| {
            match self.point_seen(&intr.to_normalized(x as f64, y as f64), motion, rig, camera) {
                Some(xw) => {
                    self.shade(&xw, out);
                    true
                }
                None => false,
            }
        })
    }

    /// Exact flows between image 1 and image 2 in camera 1's orientation
    /// (see [`crate::rectify::warp::orient_second`]): `flow12` maps a pixel of
    /// image 1 to the oriented image 2, `flow21` the reverse. Pixels whose
    /// match falls outside the frame are invalid.
    pub fn flows(
        &self,
        motion: &MotionEstimate,
        rig: &RigConfig,
        intr: &Intrinsics,
        width: usize,
        height: usize,
    ) -> (FlowField, FlowField) {
        let rr = rig.relative_rotation;
        let inside = |px: f64, py: f64| px >= 0.0 && py >= 0.0 && px <= (width - 1) as f64 && py <= (height - 1) as f64;
        let field = |camera: Camera| -> FlowField {
            let rows: Vec<Vec<[f32; 2]>> = (0..height)
                .into_par_iter()
                .map(|y| {
                    (0..width)
                        .map(|x| {
                            let q = intr.to_normalized(x as f64, y as f64);
                            let raw = match camera {
                                Camera::First => Some(q),
                                Camera::Second => ImagePoint::from_homogeneous(&(rr * q.homogeneous())),
                            };
                            let target = raw
                                .and_then(|p| self.point_seen(&p, motion, rig, camera))
                                .and_then(|xw| project_rs(&xw, motion, rig, GenerationMode::Exact).ok())
                                .and_then(|(a, b)| match camera {
                                    Camera::First => ImagePoint::from_homogeneous(&(rr.transpose() * b.homogeneous())),
                                    Camera::Second => Some(a),
                                });
                            match target {
                                Some(t) => {
                                    let (px, py) = intr.to_pixel(&t);
                                    if inside(px, py) {
                                        [(px - x as f64) as f32, (py - y as f64) as f32]
                                    } else {
                                        [f32::NAN; 2]
                                    }
                                }
                                None => [f32::NAN; 2],
                            }
                        })
                        .collect()
                })
                .collect();
            FlowField {
                width,
                height,
                data: rows.into_iter().flatten().collect(),
            }
        };
        (field(Camera::First), field(Camera::Second))
    }
}
