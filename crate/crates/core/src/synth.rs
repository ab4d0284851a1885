//! Forward rolling-shutter projection and synthetic scene generation.
//!
//! Camera 1 sees `λ u = R_ω(τ) X + τ t` at row time `τ = v - origin`.
//! Camera 2 sees `λ' u' = R_r (R_ω(τ') X + τ' t + b)`.
//!
//! Besides the exact model, camera 2 can be generated from camera 1's
//! observation through a first-order relative rotation, so that a solver's
//! algebraic equations hold exactly on the data:
//!
//! * [`GenerationMode::FirstOrder`]: the exact camera-2 point is moved onto
//!   the first-order epipolar line of camera 1's point (the line depends on
//!   the row of the moved point, so this is iterated to a fixed point);
//!   exact for the 5- and 6-point equations;
//! * [`GenerationMode::Factored`]: `R_r (I + τ'[ω]_x)(I - τ[ω]_x)`, exact for the
//!   pure-rotation equations.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use crate::error::{Error, Result};
use crate::geometry::{
    linearized_rotation, rotation_from_axis_angle, Correspondence, ImagePoint, MotionEstimate, MotionModel,
    RigConfig,
};
use crate::refine::KnotMotion;
use crate::solvers::epipolar::essential_matrix;

pub mod render;

pub const ROW_TOLERANCE: f64 = 1e-10;
pub const ROW_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GenerationMode {
    #[default]
    Exact,
    FirstOrder,
    Factored,
}

impl GenerationMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(Self::Exact),
            "first-order" | "linearized" => Some(Self::FirstOrder),
            "factored" => Some(Self::Factored),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::FirstOrder => "first-order",
            Self::Factored => "factored",
        }
    }
}

/// Projects `X` into both cameras as global-shutter cameras (no motion).
pub fn project_gs(x: &Vector3<f64>, rig: &RigConfig) -> Result<(ImagePoint, ImagePoint)> {
    if !(x.z > 0.0) {
        return Err(Error::NonPositiveDepth);
    }
    let y = rig.relative_rotation * (x + rig.baseline);
    if !(y.z > 0.0) {
        return Err(Error::NonPositiveDepth);
    }
    Ok((
        ImagePoint::new(x.x / x.z, x.y / x.z),
        ImagePoint::new(y.x / y.z, y.y / y.z),
    ))
}

/// Solves `v = π_y(f(v))` for the observed row, starting from `v0`.
///
/// A plain fixed-point step is followed by secant steps on `g(v) - v`; a
/// secant step that overshoots falls back to the fixed-point update.
pub fn solve_row<F>(f: F, v0: f64) -> Result<ImagePoint>
where
    F: Fn(f64) -> Vector3<f64>,
{
    let eval = |v: f64| -> Result<(f64, f64)> {
        let p = f(v);
        if !(p.z > 0.0) {
            return Err(Error::NonPositiveDepth);
        }
        Ok((p.x / p.z, p.y / p.z))
    };
    let (u0, g0) = eval(v0)?;
    let mut h_prev = g0 - v0;
    if h_prev.abs() <= ROW_TOLERANCE {
        return Ok(ImagePoint::new(u0, v0));
    }
    let mut v_prev = v0;
    let mut v = g0;
    // best point once within tolerance; a few more steps polish it to
    // rounding level so that downstream solvers see exact data
    let mut best: Option<(f64, ImagePoint)> = None;
    let mut polish = 0;
    for _ in 0..ROW_MAX_ITERATIONS + 3 {
        let (u, g) = eval(v)?;
        let h = g - v;
        if h.abs() <= ROW_TOLERANCE {
            if best.is_some_and(|(hb, _)| h.abs() >= hb) {
                break;
            }
            best = Some((h.abs(), ImagePoint::new(u, v)));
            polish += 1;
            if h == 0.0 || polish > 3 {
                break;
            }
        } else if best.is_some() {
            break;
        }
        let denom = h - h_prev;
        let mut next = if denom != 0.0 {
            v - h * (v - v_prev) / denom
        } else {
            g
        };
        if !next.is_finite() || (next - v).abs() > 10.0 * h.abs() {
            next = g;
        }
        v_prev = v;
        h_prev = h;
        v = next;
    }
    best.map(|(_, p)| p).ok_or(Error::NoConvergence(ROW_MAX_ITERATIONS))
}

/// Relative map from camera 1 coordinates at time `tau1` to camera 2
/// coordinates at time `tau2`, under the given generation mode.
fn relative_rotation(motion: &MotionEstimate, rig: &RigConfig, tau1: f64, tau2: f64, mode: GenerationMode) -> Matrix3<f64> {
    let w = &motion.omega;
    let rr = rig.relative_rotation;
    match mode {
        GenerationMode::Exact | GenerationMode::FirstOrder => rr * rotation_from_axis_angle(w, tau2 - tau1),
        GenerationMode::Factored => rr * linearized_rotation(w, tau2) * linearized_rotation(w, -tau1),
    }
}

/// Rolling-shutter projection of `X` into both cameras.
pub fn project_rs(
    x: &Vector3<f64>,
    motion: &MotionEstimate,
    rig: &RigConfig,
    mode: GenerationMode,
) -> Result<(ImagePoint, ImagePoint)> {
    let (gs1, gs2) = project_gs(x, rig)?;
    let first = solve_row(
        |v| {
            let (r, t) = motion.pose_at(rig.time(v));
            r * x + t
        },
        gs1.v,
    )?;
    let tau1 = rig.time(first.v);
    let (r1, t1) = motion.pose_at(tau1);
    let y = r1 * x + t1;
    let anchor = y - motion.t * tau1;
    let rr = rig.relative_rotation;
    let second = solve_row(
        |v2| {
            let tau2 = rig.time(v2);
            relative_rotation(motion, rig, tau1, tau2, mode) * anchor + rr * (motion.t * tau2 + rig.baseline)
        },
        gs2.v,
    )?;
    if mode == GenerationMode::FirstOrder {
        return Ok((first, snap_to_epipolar_line(&first, &second, motion, rig)?));
    }
    Ok((first, second))
}

/// Closest point to `target` on the first-order epipolar line of `first`,
/// with the line evaluated at the row of the returned point.
fn snap_to_epipolar_line(
    first: &ImagePoint,
    target: &ImagePoint,
    motion: &MotionEstimate,
    rig: &RigConfig,
) -> Result<ImagePoint> {
    let mut p = *target;
    for _ in 0..ROW_MAX_ITERATIONS {
        let corr = Correspondence::new(*first, p);
        let l = essential_matrix(&corr, motion, rig, true) * first.homogeneous();
        let n2 = l.x * l.x + l.y * l.y;
        if n2 <= 1e-300 {
            return Ok(p);
        }
        let s = (l.x * target.u + l.y * target.v + l.z) / n2;
        let next = ImagePoint::new(target.u - s * l.x, target.v - s * l.y);
        let step = next.distance(&p);
        p = next;
        if step <= 1e-15 {
            return Ok(p);
        }
    }
    Err(Error::NoConvergence(ROW_MAX_ITERATIONS))
}

/// Rolling-shutter projection under piecewise-linear motion.
pub fn project_rs_knots(x: &Vector3<f64>, knots: &KnotMotion, rig: &RigConfig) -> Result<(ImagePoint, ImagePoint)> {
    let (gs1, gs2) = project_gs(x, rig)?;
    let rr = rig.relative_rotation;
    let first = solve_row(
        |v| {
            let (r, t) = knots.pose_at_row(v, rig);
            r * x + t
        },
        gs1.v,
    )?;
    let second = solve_row(
        |v| {
            let (r, t) = knots.pose_at_row(v, rig);
            rr * (r * x + t + rig.baseline)
        },
        gs2.v,
    )?;
    Ok((first, second))
}

/// Which velocity components a synthetic scene excites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    Static,
    Tx,
    Txy,
    Txyz,
    Rotation,
    General,
}

impl MotionKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "static" => Some(Self::Static),
            "tx" => Some(Self::Tx),
            "txy" => Some(Self::Txy),
            "txyz" => Some(Self::Txyz),
            "rot" | "rotation" => Some(Self::Rotation),
            "general" | "6dof" => Some(Self::General),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::Tx => "tx",
            Self::Txy => "txy",
            Self::Txyz => "txyz",
            Self::Rotation => "rot",
            Self::General => "general",
        }
    }

    fn model(&self) -> MotionModel {
        match self {
            Self::Static | Self::General => MotionModel::SixDof,
            Self::Tx => MotionModel::Tx,
            Self::Txy => MotionModel::Txy,
            Self::Txyz => MotionModel::Txyz,
            Self::Rotation => MotionModel::Rot,
        }
    }

    fn has_rotation(&self) -> bool {
        matches!(self, Self::Rotation | Self::General)
    }

    fn has_translation(&self) -> bool {
        !matches!(self, Self::Static | Self::Rotation)
    }
}

/// Parameters of one synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub kind: MotionKind,
    /// Angular speed in degrees per frame (one full readout).
    pub omega_deg: f64,
    /// Translational speed as a fraction of the minimum depth per frame.
    pub trans_frac: f64,
    pub sigma_px: f64,
    pub outlier_fraction: f64,
    /// Baseline length along x as a fraction of the minimum depth.
    pub baseline_ratio: f64,
    pub num_points: usize,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub depth_min: f64,
    pub depth_max: f64,
    pub mode: GenerationMode,
    /// Relative change of the angular velocity from the centre row to either
    /// end of the frame; non-zero values generate time-varying motion.
    pub omega_ramp: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            kind: MotionKind::General,
            omega_deg: 15.0,
            trans_frac: 0.05,
            sigma_px: 0.5,
            outlier_fraction: 0.0,
            baseline_ratio: 0.0,
            num_points: 100,
            width: 1536,
            height: 1024,
            focal: 1000.0,
            depth_min: 5.0,
            depth_max: 50.0,
            mode: GenerationMode::Exact,
            omega_ramp: 0.0,
        }
    }
}

impl SceneConfig {
    /// Frame height in normalized row units.
    pub fn frame_rows(&self) -> f64 {
        self.height as f64 / self.focal
    }

    pub fn half_extent(&self) -> (f64, f64) {
        (
            self.width as f64 / (2.0 * self.focal),
            self.height as f64 / (2.0 * self.focal),
        )
    }

    /// Angular speed in radians per normalized row.
    pub fn omega_per_row(&self) -> f64 {
        self.omega_deg.to_radians() / self.frame_rows()
    }

    /// Translational speed in scene units per normalized row.
    pub fn trans_per_row(&self) -> f64 {
        self.trans_frac * self.depth_min / self.frame_rows()
    }

    pub fn noise_normalized(&self) -> f64 {
        self.sigma_px / self.focal
    }

    fn validate(&self) -> Result<()> {
        let ok = self.width > 0
            && self.height > 0
            && self.focal > 0.0
            && self.depth_min > 0.0
            && self.depth_max >= self.depth_min
            && self.sigma_px >= 0.0
            && (0.0..=1.0).contains(&self.outlier_fraction)
            && self.omega_deg.is_finite()
            && self.trans_frac.is_finite()
            && self.baseline_ratio.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid scene configuration {self:?}")))
        }
    }
}

/// Synthetic scene with ground truth and noisy observations.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub points: Vec<Vector3<f64>>,
    /// Constant-velocity ground truth (the centre knot for ramped scenes).
    pub motion: MotionEstimate,
    pub knots: Option<KnotMotion>,
    pub rig: RigConfig,
    pub noise_sigma: f64,
    pub focal: f64,
    pub seed: u64,
    pub min_depth: f64,
    pub correspondences: Vec<Correspondence>,
    /// Noise-free observations.
    pub clean: Vec<Correspondence>,
    /// Global-shutter projection of each point in camera 1.
    pub gs: Vec<ImagePoint>,
    pub is_outlier: Vec<bool>,
    pub config: SceneConfig,
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::from(UnitSphere.sample(rng))
}

fn random_motion(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> MotionEstimate {
    let omega = if cfg.kind.has_rotation() {
        random_unit(rng) * cfg.omega_per_row()
    } else {
        Vector3::zeros()
    };
    let dir = match cfg.kind {
        MotionKind::Tx => Vector3::new(if rng.random_bool(0.5) { 1.0 } else { -1.0 }, 0.0, 0.0),
        MotionKind::Txy => {
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            Vector3::new(a.cos(), a.sin(), 0.0)
        }
        MotionKind::Txyz | MotionKind::General => random_unit(rng),
        MotionKind::Static | MotionKind::Rotation => Vector3::zeros(),
    };
    let t = if cfg.kind.has_translation() {
        dir * cfg.trans_per_row()
    } else {
        Vector3::zeros()
    };
    MotionEstimate {
        omega,
        t,
        scale_known: true,
        model: cfg.kind.model(),
    }
}

/// Generates a scene deterministically from `seed`.
pub fn generate_scene(cfg: &SceneConfig, seed: u64) -> Result<SyntheticScene> {
    if cfg.num_points == 0 {
        return Err(Error::EmptyScene);
    }
    build_scene(cfg, seed, None)
}

/// Scene over user-supplied points in camera 1's frame at the centre row
/// (`z` forward). Points that leave either image are dropped; the motion,
/// noise and outliers are drawn from `seed` as for [`generate_scene`], and
/// `num_points`, `depth_min` and `depth_max` are ignored except that
/// `depth_min` scales the baseline.
pub fn scene_from_points(cfg: &SceneConfig, points: &[Vector3<f64>], seed: u64) -> Result<SyntheticScene> {
    if points.is_empty() {
        return Err(Error::EmptyScene);
    }
    build_scene(cfg, seed, Some(points))
}

fn build_scene(cfg: &SceneConfig, seed: u64, imported: Option<&[Vector3<f64>]>) -> Result<SyntheticScene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let motion = random_motion(cfg, &mut rng);
    let rig = RigConfig::mirrored().with_baseline(Vector3::new(cfg.baseline_ratio * cfg.depth_min, 0.0, 0.0));
    let (hw, hh) = cfg.half_extent();
    let knots = if cfg.omega_ramp != 0.0 {
        let rows = [-hh, 0.0, hh];
        let scales = [1.0 - cfg.omega_ramp, 1.0, 1.0 + cfg.omega_ramp];
        Some(KnotMotion::new(
            rows.iter()
                .zip(scales.iter())
                .map(|(r, s)| (*r, motion.omega * *s, motion.t))
                .collect(),
        )?)
    } else {
        None
    };
    let inside = |p: &ImagePoint| p.u.abs() <= hw && p.v.abs() <= hh;

    let mut points = Vec::with_capacity(cfg.num_points);
    let mut clean = Vec::with_capacity(cfg.num_points);
    let mut gs = Vec::with_capacity(cfg.num_points);
    let max_attempts = imported.map_or(100 * cfg.num_points, <[_]>::len);
    let mut attempts = 0;
    while attempts < max_attempts && (imported.is_some() || points.len() < cfg.num_points) {
        attempts += 1;
        let x = match imported {
            Some(pts) => pts[attempts - 1],
            None => {
                let u: f64 = rng.random_range(-hw..hw);
                let v: f64 = rng.random_range(-hh..hh);
                let depth: f64 = rng.random_range(cfg.depth_min..=cfg.depth_max);
                Vector3::new(u * depth, v * depth, depth)
            }
        };
        if !(x.z > 0.0) || !x.iter().all(|c| c.is_finite()) {
            continue;
        }
        let (u, v) = (x.x / x.z, x.y / x.z);
        if !(u.abs() <= hw && v.abs() <= hh) {
            continue;
        }
        let projected = match &knots {
            Some(k) => project_rs_knots(&x, k, &rig),
            None => project_rs(&x, &motion, &rig, cfg.mode),
        };
        let Ok((p1, p2)) = projected else { continue };
        if !inside(&p1) || !inside(&p2) {
            continue;
        }
        points.push(x);
        clean.push(Correspondence::new(p1, p2));
        gs.push(ImagePoint::new(u, v));
    }
    if points.is_empty() {
        return Err(Error::EmptyScene);
    }

    let sigma = cfg.noise_normalized();
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let draw = |rng: &mut ChaCha8Rng| if sigma > 0.0 { noise.sample(rng) } else { 0.0 };
    let n_out = (cfg.outlier_fraction * points.len() as f64).round() as usize;
    let mut is_outlier = vec![false; points.len()];
    let mut order: Vec<usize> = (0..points.len()).collect();
    for i in 0..n_out {
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
        is_outlier[order[i]] = true;
    }
    let mut correspondences = Vec::with_capacity(points.len());
    for (c, out) in clean.iter().zip(is_outlier.iter()) {
        let first = ImagePoint::new(c.first.u + draw(&mut rng), c.first.v + draw(&mut rng));
        let second = if *out {
            ImagePoint::new(rng.random_range(-hw..hw), rng.random_range(-hh..hh))
        } else {
            ImagePoint::new(c.second.u + draw(&mut rng), c.second.v + draw(&mut rng))
        };
        correspondences.push(Correspondence::new(first, second));
    }

    Ok(SyntheticScene {
        points,
        motion,
        knots,
        rig,
        noise_sigma: cfg.sigma_px,
        focal: cfg.focal,
        seed,
        min_depth: cfg.depth_min,
        correspondences,
        clean,
        gs,
        is_outlier,
        config: cfg.clone(),
    })
}

/// Pixel distance between the GS point predicted from `estimate` and the truth.
/// A mapping failure counts as no correction (the raw camera-1 point).
pub fn undistortion_error(
    corr: &Correspondence,
    estimate: &MotionEstimate,
    gs_truth: &ImagePoint,
    rig: &RigConfig,
    focal: f64,
) -> f64 {
    let predicted = crate::rectify::undistort_correspondence(corr, estimate, rig).unwrap_or(corr.first);
    predicted.distance(gs_truth) * focal
}

/// The interpolation baseline: midpoint of camera 1's point and camera 2's
/// point rotated into camera 1's orientation.
pub fn interpolation_point(corr: &Correspondence, rig: &RigConfig) -> ImagePoint {
    match rig.second_in_first_orientation(&corr.second) {
        Some(w) => ImagePoint::new(0.5 * (corr.first.u + w.u), 0.5 * (corr.first.v + w.v)),
        None => corr.first,
    }
}

pub fn interpolation_error(corr: &Correspondence, gs_truth: &ImagePoint, rig: &RigConfig, focal: f64) -> f64 {
    interpolation_point(corr, rig).distance(gs_truth) * focal
}
