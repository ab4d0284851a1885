//! Instantaneous two-row epipolar geometry.
//!
//! Rows `v` (camera 1) and `v'` (camera 2) are related by
//! `R_i = R_r R_ω(τ' - τ)` and `T_i = τ' R_r t + R_r b - τ R_i t`, so that
//! `u'ᵀ E u = 0` with
//!
//! `E = τ' [R_r t]_x R_i - τ R_i [t]_x + [R_r b]_x R_i`,
//!
//! which equals `[T_i]_x R_i` for a proper rotation `R_i`. Writing
//! `w = R_rᵀ u'` and `R_d = R_ω(τ' - τ)`, the constraint is affine in `t`:
//!
//! `c · t + e = 0`, `c = τ' (R_d u × w) - τ (u × R_dᵀ w)`, `e = b · (R_d u × w)`.
//!
//! The solvers use the first-order form `R_d ≈ I + (τ' - τ)[ω]_x`, in which
//! `c` and `e` are affine in `ω`.

use nalgebra::{Matrix3, Vector3};

use crate::geometry::{
    linearized_rotation, rotation_from_axis_angle, skew, Correspondence, InstantPosePair, MotionEstimate,
    RigConfig,
};
use crate::polysolve::{Poly3, PolyVec3};

/// Relative pose between row `v` of camera 1 and row `v_prime` of camera 2.
pub fn instant_pose(motion: &MotionEstimate, rig: &RigConfig, v: f64, v_prime: f64) -> InstantPosePair {
    let tau = rig.time(v);
    let tau2 = rig.time(v_prime);
    let rr = rig.relative_rotation;
    let rotation = rr * rotation_from_axis_angle(&motion.omega, tau2 - tau);
    let translation = tau2 * (rr * motion.t) + rr * rig.baseline - tau * (rotation * motion.t);
    InstantPosePair { rotation, translation }
}

/// Essential matrix of the row pair, with exact or first-order rotation.
pub fn essential_matrix(corr: &Correspondence, motion: &MotionEstimate, rig: &RigConfig, linearized: bool) -> Matrix3<f64> {
    let tau = rig.time(corr.first.v);
    let tau2 = rig.time(corr.second.v);
    let rr = rig.relative_rotation;
    let rd = if linearized {
        linearized_rotation(&motion.omega, tau2 - tau)
    } else {
        rotation_from_axis_angle(&motion.omega, tau2 - tau)
    };
    let ri = rr * rd;
    (skew(&(rr * (motion.t * tau2 + rig.baseline)))) * ri - ri * skew(&motion.t) * tau
}

/// `u'ᵀ E u` for one correspondence.
pub fn epipolar_residual(corr: &Correspondence, motion: &MotionEstimate, rig: &RigConfig, linearized: bool) -> f64 {
    let e = essential_matrix(corr, motion, rig, linearized);
    corr.second.homogeneous().dot(&(e * corr.first.homogeneous()))
}

/// `(c, e)` of the constraint `c · t + e = 0` at a fixed `ω`.
pub fn constraint_coefficients(
    corr: &Correspondence,
    omega: &Vector3<f64>,
    rig: &RigConfig,
    linearized: bool,
) -> (Vector3<f64>, f64) {
    let tau = rig.time(corr.first.v);
    let tau2 = rig.time(corr.second.v);
    let u = corr.first.homogeneous();
    let w = rig.relative_rotation.transpose() * corr.second.homogeneous();
    let rd = if linearized {
        linearized_rotation(omega, tau2 - tau)
    } else {
        rotation_from_axis_angle(omega, tau2 - tau)
    };
    let rdu_w = (rd * u).cross(&w);
    let c = tau2 * rdu_w - tau * u.cross(&(rd.transpose() * w));
    (c, rig.baseline.dot(&rdu_w))
}

/// First-order `(c(ω), e(ω))` as polynomials affine in `ω`.
pub fn constraint_polynomials(corr: &Correspondence, rig: &RigConfig) -> (PolyVec3, Poly3) {
    let tau = rig.time(corr.first.v);
    let tau2 = rig.time(corr.second.v);
    let d = tau2 - tau;
    let u = corr.first.homogeneous();
    let w = rig.relative_rotation.transpose() * corr.second.homogeneous();
    let omega = PolyVec3::unknowns();
    // R_d u and R_dᵀ w to first order
    let rdu = PolyVec3::constant(&u) + omega.cross(&PolyVec3::constant(&u)).scale(d);
    let rdtw = PolyVec3::constant(&w) - omega.cross(&PolyVec3::constant(&w)).scale(d);
    let rdu_w = rdu.cross(&PolyVec3::constant(&w));
    let c = rdu_w.scale(tau2) - PolyVec3::constant(&u).cross(&rdtw).scale(tau);
    let e = rdu_w.dot_const(&rig.baseline);
    (c, e)
}

/// Scale-free residual `|c · t + e| / (|c| |t| + |e|)` of the first-order
/// constraint.
pub fn normalized_constraint_residual(corr: &Correspondence, motion: &MotionEstimate, rig: &RigConfig) -> f64 {
    let (c, e) = constraint_coefficients(corr, &motion.omega, rig, true);
    let den = c.norm() * motion.t.norm() + e.abs();
    if den == 0.0 {
        return 0.0;
    }
    (c.dot(&motion.t) + e).abs() / den
}

/// Sampson distance of the exact-rotation epipolar constraint.
pub fn sampson_distance(corr: &Correspondence, motion: &MotionEstimate, rig: &RigConfig) -> f64 {
    let e = essential_matrix(corr, motion, rig, false);
    let x1 = corr.first.homogeneous();
    let x2 = corr.second.homogeneous();
    let ex1 = e * x1;
    let etx2 = e.transpose() * x2;
    let num = x2.dot(&ex1);
    let den = ex1.x * ex1.x + ex1.y * ex1.y + etx2.x * etx2.x + etx2.y * etx2.y;
    if den <= 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    num.abs() / den.sqrt()
}
