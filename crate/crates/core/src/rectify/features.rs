//! Sparse undistortion of correspondences.

use crate::error::{Error, Result};
use crate::geometry::{rotation_from_axis_angle, Correspondence, ImagePoint, MotionEstimate, MotionModel, RigConfig};
use crate::solvers::solve_txy;

use super::triangulate::triangulate_rowpair;

/// `λ u_g = R_ω(τ)ᵀ u`.
pub fn undistort_point_rotation(p: &ImagePoint, omega: &nalgebra::Vector3<f64>, rig: &RigConfig) -> Result<ImagePoint> {
    let r = rotation_from_axis_angle(omega, rig.time(p.v));
    let h = r.transpose() * p.homogeneous();
    if h.z <= 0.0 {
        return Err(Error::BehindCamera);
    }
    Ok(ImagePoint::new(h.x / h.z, h.y / h.z))
}

/// Camera-2 point rotated into camera 1's GS orientation.
fn second_rotation_compensated(corr: &Correspondence, omega: &nalgebra::Vector3<f64>, rig: &RigConfig) -> Result<ImagePoint> {
    let r = rotation_from_axis_angle(omega, rig.time(corr.second.v));
    let h = r.transpose() * (rig.relative_rotation.transpose() * corr.second.homogeneous());
    if h.z <= 0.0 {
        return Err(Error::BehindCamera);
    }
    Ok(ImagePoint::new(h.x / h.z, h.y / h.z))
}

fn midpoint(a: &ImagePoint, b: &ImagePoint) -> ImagePoint {
    ImagePoint::new(0.5 * (a.u + b.u), 0.5 * (a.v + b.v))
}

/// GS position of the camera-1 point under `estimate`.
///
/// Rotation uses the row-wise inverse rotation, TX the x-midpoint, TXY the
/// single-correspondence closed form restricted to the estimated direction. Models with a full translation are
/// triangulated from the two row poses; when the rays carry no depth the
/// midpoint of the two rotation-compensated observations is returned.
pub fn undistort_correspondence(corr: &Correspondence, estimate: &MotionEstimate, rig: &RigConfig) -> Result<ImagePoint> {
    if estimate.omega == nalgebra::Vector3::zeros() && estimate.t == nalgebra::Vector3::zeros() && !rig.has_baseline() {
        return Ok(corr.first);
    }
    match estimate.model {
        MotionModel::Rot => undistort_point_rotation(&corr.first, &estimate.omega, rig),
        MotionModel::Tx => {
            let w = second_rotation_compensated(corr, &estimate.omega, rig)?;
            Ok(ImagePoint::new(0.5 * (corr.first.u + w.u), corr.first.v))
        }
        MotionModel::Txy => {
            // keep only the component of the per-point ratio t/λ along the
            // estimated direction; depth stays free per point
            let sol = solve_txy(corr, rig)?;
            let d = nalgebra::Vector2::new(estimate.t.x, estimate.t.y);
            let dd = d.norm_squared();
            let ratio = if dd > 0.0 { d * (sol.ratio.dot(&d) / dd) } else { nalgebra::Vector2::zeros() };
            let tau = rig.time(corr.first.v);
            Ok(ImagePoint::new(corr.first.u - tau * ratio.x, corr.first.v - tau * ratio.y))
        }
        MotionModel::Txyz | MotionModel::SixDof | MotionModel::SixDofBaseline => {
            match triangulate_rowpair(corr, estimate, rig, 0.0) {
                Ok(x) => Ok(ImagePoint::new(x.x / x.z, x.y / x.z)),
                Err(Error::DegenerateBaseline | Error::BehindCamera) => {
                    let a = undistort_point_rotation(&corr.first, &estimate.omega, rig)?;
                    let b = second_rotation_compensated(corr, &estimate.omega, rig)?;
                    Ok(midpoint(&a, &b))
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// [`undistort_correspondence`] over a list; the first failure aborts.
pub fn undistort_features(corrs: &[Correspondence], estimate: &MotionEstimate, rig: &RigConfig) -> Result<Vec<ImagePoint>> {
    corrs.iter().map(|c| undistort_correspondence(c, estimate, rig)).collect()
}
