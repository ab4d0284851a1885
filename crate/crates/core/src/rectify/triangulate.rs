//! Two-row triangulation.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{rotation_from_axis_angle, Correspondence, MotionEstimate, RigConfig};

/// Rays whose centres are closer than this (relative to the ray scale) carry
/// no depth.
const MIN_BASELINE: f64 = 1e-12;

/// A ray in the virtual global-shutter frame of camera 1.
#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

/// Rays of both observations expressed in the GS frame (camera 1 at time 0).
pub fn rowpair_rays(corr: &Correspondence, motion: &MotionEstimate, rig: &RigConfig) -> (Ray, Ray) {
    let tau = rig.time(corr.first.v);
    let tau2 = rig.time(corr.second.v);
    let r1 = rotation_from_axis_angle(&motion.omega, tau);
    let r2 = rotation_from_axis_angle(&motion.omega, tau2);
    let ray1 = Ray {
        origin: -(r1.transpose() * (motion.t * tau)),
        direction: r1.transpose() * corr.first.homogeneous(),
    };
    let ray2 = Ray {
        origin: -(r2.transpose() * (motion.t * tau2 + rig.baseline)),
        direction: r2.transpose() * (rig.relative_rotation.transpose() * corr.second.homogeneous()),
    };
    (ray1, ray2)
}

/// Midpoint triangulation using the poses of the two observed rows.
///
/// `min_row_gap` rejects pairs whose rows are too close in time when the rig
/// has no baseline; pass 0 to only reject exactly coincident centres. For a
/// scale-free estimate the sign of `t` is arbitrary, so a point behind both
/// cameras is mirrored through the origin instead of being rejected.
pub fn triangulate_rowpair(
    corr: &Correspondence,
    motion: &MotionEstimate,
    rig: &RigConfig,
    min_row_gap: f64,
) -> Result<Vector3<f64>> {
    if !rig.has_baseline() && (corr.first.v - corr.second.v).abs() < min_row_gap {
        return Err(Error::DegenerateBaseline);
    }
    let (a, b) = rowpair_rays(corr, motion, rig);
    let w0 = a.origin - b.origin;
    let scale = a.origin.norm().max(b.origin.norm()).max(1e-300);
    if w0.norm() <= MIN_BASELINE * scale || w0.norm() == 0.0 {
        return Err(Error::DegenerateBaseline);
    }
    let (d1, d2) = (a.direction, b.direction);
    let aa = d1.dot(&d1);
    let bb = d1.dot(&d2);
    let cc = d2.dot(&d2);
    let dd = d1.dot(&w0);
    let ee = d2.dot(&w0);
    let den = aa * cc - bb * bb;
    if den <= 1e-15 * aa * cc {
        return Err(Error::DegenerateBaseline);
    }
    let mut s = (bb * ee - cc * dd) / den;
    let mut r = (aa * ee - bb * dd) / den;
    let mut sign = 1.0;
    if !motion.scale_known && !rig.has_baseline() && s < 0.0 && r < 0.0 {
        s = -s;
        r = -r;
        sign = -1.0;
    }
    if s <= 0.0 || r <= 0.0 {
        return Err(Error::BehindCamera);
    }
    let p = 0.5 * ((sign * a.origin + d1 * s) + (sign * b.origin + d2 * r));
    if p.z <= 0.0 {
        return Err(Error::BehindCamera);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MotionModel;
    use crate::synth::{project_gs, project_rs, GenerationMode};

    #[test]
    fn recovers_points_under_general_motion() {
        let rig = RigConfig::mirrored();
        let m = MotionEstimate::new(MotionModel::SixDof, Vector3::new(0.1, -0.2, 0.05), Vector3::new(0.4, 0.1, -0.2), true);
        for x in [Vector3::new(1.0, 1.5, 6.0), Vector3::new(-2.0, -1.0, 8.0), Vector3::new(0.5, -2.0, 5.0)] {
            let (a, b) = project_rs(&x, &m, &rig, GenerationMode::Exact).unwrap();
            let p = triangulate_rowpair(&Correspondence::new(a, b), &m, &rig, 0.0).unwrap();
            assert!((p - x).norm() < 1e-9 * x.norm());
        }
    }

    #[test]
    fn scale_free_estimate_gives_the_same_direction() {
        let rig = RigConfig::mirrored();
        let m = MotionEstimate::new(MotionModel::SixDof, Vector3::new(0.1, -0.2, 0.05), Vector3::new(0.4, 0.1, -0.2), true);
        let x = Vector3::new(1.0, 1.5, 6.0);
        let (a, b) = project_rs(&x, &m, &rig, GenerationMode::Exact).unwrap();
        let c = Correspondence::new(a, b);
        for s in [0.3, -2.0] {
            let scaled = MotionEstimate { t: m.t * s, scale_known: false, ..m };
            let p = triangulate_rowpair(&c, &scaled, &rig, 0.0).unwrap();
            let (g, _) = project_gs(&x, &rig).unwrap();
            assert!((p.x / p.z - g.u).abs() < 1e-12 && (p.y / p.z - g.v).abs() < 1e-12);
        }
    }

    #[test]
    fn coincident_rows_are_rejected() {
        let rig = RigConfig::mirrored();
        let m = MotionEstimate::new(MotionModel::Tx, Vector3::zeros(), Vector3::new(0.3, 0.0, 0.0), true);
        let c = Correspondence::from_coords(0.1, 0.0, -0.1, 0.0);
        assert!(matches!(triangulate_rowpair(&c, &m, &rig, 0.0), Err(Error::DegenerateBaseline)));
        let c = Correspondence::from_coords(0.1, 0.01, -0.1, -0.01);
        assert!(matches!(triangulate_rowpair(&c, &m, &rig, 0.05), Err(Error::DegenerateBaseline)));
    }

    #[test]
    fn depth_matches_the_tx_ratio() {
        // t_x / λ from the closed form times λ gives back t_x
        let rig = RigConfig::mirrored();
        let t = 0.2;
        let m = MotionEstimate::new(MotionModel::Tx, Vector3::zeros(), Vector3::new(t, 0.0, 0.0), true);
        let x = Vector3::new(0.5, 1.2, 4.0);
        let (a, b) = project_rs(&x, &m, &rig, GenerationMode::Exact).unwrap();
        let c = Correspondence::new(a, b);
        let p = triangulate_rowpair(&c, &m, &rig, 0.0).unwrap();
        let tx = crate::solvers::solve_tx(&c, &rig, 1e-9).unwrap();
        assert!((tx.ratio * p.z - t).abs() < 1e-9);
    }
}
