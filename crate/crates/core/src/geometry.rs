//! Domain types and coordinate conventions.
//!
//! All image coordinates are normalized (intrinsics removed). The row
//! coordinate `v` is measured from the principal point and doubles as the
//! time variable: camera 1 captures row `v` at time `v - row_time_origin`,
//! camera 2 captures its own row `v'` at time `v' - row_time_origin`. The
//! opposite physical readout of camera 2 is carried entirely by the relative
//! rotation of the rig (by default a 180 degree turn about the optical axis).

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};

/// A normalized image point. `v` is also the scanline (time) coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
}

impl ImagePoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn try_new(u: f64, v: f64) -> Result<Self> {
        if u.is_finite() && v.is_finite() {
            Ok(Self { u, v })
        } else {
            Err(Error::InvalidArgument(format!(
                "non-finite image point ({u}, {v})"
            )))
        }
    }

    /// `[u, v, 1]`.
    pub fn homogeneous(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, 1.0)
    }

    /// Dehomogenizes `p`; `None` when the third coordinate vanishes.
    pub fn from_homogeneous(p: &Vector3<f64>) -> Option<Self> {
        if p.z.abs() < 1e-300 {
            return None;
        }
        Some(Self::new(p.x / p.z, p.y / p.z))
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.u, self.v)
    }

    pub fn distance(&self, other: &ImagePoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// A point seen in both cameras. `second` lives in camera 2's own raw frame;
/// the rig rotation is applied only inside the equations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Correspondence {
    pub first: ImagePoint,
    pub second: ImagePoint,
}

impl Correspondence {
    pub const fn new(first: ImagePoint, second: ImagePoint) -> Self {
        Self { first, second }
    }

    pub fn from_coords(u1: f64, v1: f64, u2: f64, v2: f64) -> Self {
        Self::new(ImagePoint::new(u1, v1), ImagePoint::new(u2, v2))
    }
}

/// Geometry of the two-camera rig.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigConfig {
    pub relative_rotation: Matrix3<f64>,
    /// Known offset entering camera 2 as `R_r (X + b)`.
    pub baseline: Vector3<f64>,
    pub row_time_origin: f64,
}

impl Default for RigConfig {
    fn default() -> Self {
        Self::mirrored()
    }
}

impl RigConfig {
    /// Zero-baseline rig with opposite readout directions.
    pub fn mirrored() -> Self {
        Self {
            relative_rotation: Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0)),
            baseline: Vector3::zeros(),
            row_time_origin: 0.0,
        }
    }

    pub fn with_baseline(mut self, baseline: Vector3<f64>) -> Self {
        self.baseline = baseline;
        self
    }

    /// Builds a rig after checking that `relative_rotation` is a proper rotation.
    pub fn new(
        relative_rotation: Matrix3<f64>,
        baseline: Vector3<f64>,
        row_time_origin: f64,
    ) -> Result<Self> {
        let orth = (relative_rotation.transpose() * relative_rotation - Matrix3::identity()).norm();
        let det = relative_rotation.determinant();
        if orth > 1e-12 || (det - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "relative rotation is not a rotation (orthogonality error {orth:e}, det {det})"
            )));
        }
        if !baseline.iter().all(|x| x.is_finite()) || !row_time_origin.is_finite() {
            return Err(Error::InvalidArgument("non-finite rig parameter".into()));
        }
        Ok(Self {
            relative_rotation,
            baseline,
            row_time_origin,
        })
    }

    /// Time at which row `v` is captured (same for both cameras).
    #[inline]
    pub fn time(&self, v: f64) -> f64 {
        v - self.row_time_origin
    }

    pub fn has_baseline(&self) -> bool {
        self.baseline.norm() > 0.0
    }

    /// Camera 2 point rotated back into camera 1 orientation and dehomogenized.
    /// For the mirrored rig this is simply `(-u', -v')`.
    pub fn second_in_first_orientation(&self, p: &ImagePoint) -> Option<ImagePoint> {
        ImagePoint::from_homogeneous(&(self.relative_rotation.transpose() * p.homogeneous()))
    }
}

/// Which motion model an estimate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionModel {
    Tx,
    Txy,
    Txyz,
    Rot,
    SixDof,
    SixDofBaseline,
}

impl MotionModel {
    pub const ALL: [MotionModel; 6] = [
        MotionModel::Tx,
        MotionModel::Txy,
        MotionModel::Txyz,
        MotionModel::Rot,
        MotionModel::SixDof,
        MotionModel::SixDofBaseline,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            MotionModel::Tx => "TX",
            MotionModel::Txy => "TXY",
            MotionModel::Txyz => "TXYZ",
            MotionModel::Rot => "ROT",
            MotionModel::SixDof => "SIXDOF",
            MotionModel::SixDofBaseline => "SIXDOF_BASELINE",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|m| m.tag() == tag)
    }

    pub fn has_rotation(&self) -> bool {
        matches!(
            self,
            MotionModel::Rot | MotionModel::SixDof | MotionModel::SixDofBaseline
        )
    }

    pub fn has_translation(&self) -> bool {
        !matches!(self, MotionModel::Rot)
    }

    /// Number of correspondences in a minimal sample.
    pub fn minimal_sample(&self) -> usize {
        match self {
            MotionModel::Tx | MotionModel::Txy => 1,
            MotionModel::Txyz | MotionModel::Rot => 2,
            MotionModel::SixDof => 5,
            MotionModel::SixDofBaseline => 6,
        }
    }
}

impl std::fmt::Display for MotionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Constant rig velocity. Units are per normalized row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionEstimate {
    pub omega: Vector3<f64>,
    pub t: Vector3<f64>,
    pub scale_known: bool,
    pub model: MotionModel,
}

impl MotionEstimate {
    /// Zeroes the components the model excludes and, when the scale is
    /// unknown, normalizes `t` to `t_x + t_y = 1` (unit norm if that sum
    /// vanishes).
    pub fn new(model: MotionModel, omega: Vector3<f64>, t: Vector3<f64>, scale_known: bool) -> Self {
        let mut omega = omega;
        let mut t = t;
        match model {
            MotionModel::Tx => {
                omega = Vector3::zeros();
                t.y = 0.0;
                t.z = 0.0;
            }
            MotionModel::Txy => {
                omega = Vector3::zeros();
                t.z = 0.0;
            }
            MotionModel::Txyz => omega = Vector3::zeros(),
            MotionModel::Rot => t = Vector3::zeros(),
            MotionModel::SixDof | MotionModel::SixDofBaseline => {}
        }
        if !scale_known {
            t = gauge_normalize(&t);
        }
        Self {
            omega,
            t,
            scale_known,
            model,
        }
    }

    pub fn zero(model: MotionModel) -> Self {
        Self::new(model, Vector3::zeros(), Vector3::zeros(), true)
    }

    pub fn rotation(omega: Vector3<f64>) -> Self {
        Self::new(MotionModel::Rot, omega, Vector3::zeros(), true)
    }

    /// Same velocities, relabelled as a different model.
    pub fn with_model(&self, model: MotionModel) -> Self {
        Self::new(model, self.omega, self.t, self.scale_known)
    }

    /// Camera 1 pose at time `tau`: `X -> R X + tau t`.
    pub fn pose_at(&self, tau: f64) -> (Matrix3<f64>, Vector3<f64>) {
        (rotation_from_axis_angle(&self.omega, tau), self.t * tau)
    }
}

/// Translation gauge for scale-free estimates.
pub fn gauge_normalize(t: &Vector3<f64>) -> Vector3<f64> {
    let n = t.norm();
    if n == 0.0 || !n.is_finite() {
        return *t;
    }
    let s = t.x + t.y;
    if s.abs() > 1e-6 * n {
        t / s
    } else {
        t / n
    }
}

/// Relative pose between row `v` of camera 1 and row `v'` of camera 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstantPosePair {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Pinhole intrinsics used only at the pixel boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(focal: f64, cx: f64, cy: f64) -> Self {
        Self { focal, cx, cy }
    }

    /// Principal point at the center of a `width x height` pixel grid.
    pub fn centered(focal: f64, width: usize, height: usize) -> Self {
        Self {
            focal,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
        }
    }

    pub fn to_normalized(&self, x: f64, y: f64) -> ImagePoint {
        ImagePoint::new((x - self.cx) / self.focal, (y - self.cy) / self.focal)
    }

    pub fn to_pixel(&self, p: &ImagePoint) -> (f64, f64) {
        (p.u * self.focal + self.cx, p.v * self.focal + self.cy)
    }
}

/// `[w]_x`, the cross-product matrix.
#[inline]
pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// `exp(alpha [w]_x)` via the Rodrigues formula.
pub fn rotation_from_axis_angle(w: &Vector3<f64>, alpha: f64) -> Matrix3<f64> {
    let phi = w * alpha;
    let theta2 = phi.norm_squared();
    let k = skew(&phi);
    let (a, b) = if theta2 < 1e-8 {
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// First-order rotation `I + alpha [w]_x`; not orthonormal in general.
pub fn linearized_rotation(w: &Vector3<f64>, alpha: f64) -> Matrix3<f64> {
    Matrix3::identity() + skew(&(w * alpha))
}

/// Left Jacobian of SO(3): `exp(phi + d) ~ exp([J_l(phi) d]_x) exp(phi)`.
pub fn so3_left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let k = skew(phi);
    let (a, b) = if theta2 < 1e-8 {
        (
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
            1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0,
        )
    } else {
        let theta = theta2.sqrt();
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Matrix3::identity() + k * a + k * k * b
}
