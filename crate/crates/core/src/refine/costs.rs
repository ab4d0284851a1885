//! Per-correspondence residuals with derivatives.
//!
//! Both costs take the motion at each observed row separately, `(ω_1, t_1)`
//! at camera 1's row `v` and `(ω_2, t_2)` at camera 2's row `v'`, so that a
//! constant motion and an interpolated one share the same code. With
//! `R_1 = exp(τ[ω_1]_x)`, `R_2 = exp(τ'[ω_2]_x)` the row-pair pose is
//!
//! `R_i = R_r R_2 R_1ᵀ`, `T_i = R_r (τ' t_2 + b) - τ R_i t_1`, `E = [T_i]_x R_i`.

use nalgebra::{Matrix2x6, Matrix3, SVector, Vector2, Vector3};

use crate::geometry::{rotation_from_axis_angle, skew, so3_left_jacobian, Correspondence, RigConfig};

/// Residual returned for a point that maps behind camera 1.
pub const BEHIND_PENALTY: f64 = 1e3;

/// Reprojection residual of the rotation-only model, `u - π(R_1 R_2ᵀ R_rᵀ u')`,
/// and its derivative with respect to `(ω_1, ω_2)`.
pub fn rotation_residual(
    corr: &Correspondence,
    rig: &RigConfig,
    omega1: &Vector3<f64>,
    omega2: &Vector3<f64>,
) -> (Vector2<f64>, Matrix2x6<f64>) {
    let tau = rig.time(corr.first.v);
    let tau2 = rig.time(corr.second.v);
    let a = rig.relative_rotation.transpose() * corr.second.homogeneous();
    let r1 = rotation_from_axis_angle(omega1, tau);
    let r2 = rotation_from_axis_angle(omega2, tau2);
    let q = r1 * r2.transpose();
    let y = q * a;
    if !(y.z > 1e-12) {
        return (Vector2::repeat(BEHIND_PENALTY), Matrix2x6::zeros());
    }
    let res = Vector2::new(corr.first.u - y.x / y.z, corr.first.v - y.y / y.z);
    let dy1 = -skew(&y) * so3_left_jacobian(&(omega1 * tau)) * tau;
    let dy2 = q * skew(&a) * so3_left_jacobian(&(omega2 * tau2)) * tau2;
    let iz = 1.0 / y.z;
    let dpi = nalgebra::Matrix2x3::new(iz, 0.0, -y.x * iz * iz, 0.0, iz, -y.y * iz * iz);
    let mut j = Matrix2x6::zeros();
    j.fixed_view_mut::<2, 3>(0, 0).copy_from(&(-dpi * dy1));
    j.fixed_view_mut::<2, 3>(0, 3).copy_from(&(-dpi * dy2));
    (res, j)
}

/// Row-pair essential matrix for possibly different motions at the two rows.
pub fn rowpair_essential(
    corr: &Correspondence,
    rig: &RigConfig,
    omega1: &Vector3<f64>,
    t1: &Vector3<f64>,
    omega2: &Vector3<f64>,
    t2: &Vector3<f64>,
) -> Matrix3<f64> {
    let tau = rig.time(corr.first.v);
    let tau2 = rig.time(corr.second.v);
    let rr = rig.relative_rotation;
    let ri = rr * rotation_from_axis_angle(omega2, tau2) * rotation_from_axis_angle(omega1, tau).transpose();
    let ti = rr * (t2 * tau2 + rig.baseline) - ri * t1 * tau;
    skew(&ti) * ri
}

/// Signed Sampson residual `x2ᵀ E x1 / sqrt(|(E x1)_12|² + |(Eᵀ x2)_12|²)` and
/// its derivative with respect to `(ω_1, t_1, ω_2, t_2)`.
pub fn sampson_residual(
    corr: &Correspondence,
    rig: &RigConfig,
    omega1: &Vector3<f64>,
    t1: &Vector3<f64>,
    omega2: &Vector3<f64>,
    t2: &Vector3<f64>,
) -> (f64, SVector<f64, 12>) {
    let tau = rig.time(corr.first.v);
    let tau2 = rig.time(corr.second.v);
    let rr = rig.relative_rotation;
    let rot1 = rotation_from_axis_angle(omega1, tau);
    let rot2 = rotation_from_axis_angle(omega2, tau2);
    let ri = rr * rot2 * rot1.transpose();
    let ti = rr * (t2 * tau2 + rig.baseline) - ri * t1 * tau;
    let sti = skew(&ti);
    let e = sti * ri;
    let x1 = corr.first.homogeneous();
    let x2 = corr.second.homogeneous();
    let p = e * x1;
    let q = e.transpose() * x2;
    let n = x2.dot(&p);
    let d = p.x * p.x + p.y * p.y + q.x * q.x + q.y * q.y;
    if d <= 0.0 {
        return (0.0, SVector::zeros());
    }
    let sd = d.sqrt();
    let r = n / sd;

    let grad = |de: &Matrix3<f64>| -> f64 {
        let dp = de * x1;
        let dq = de.transpose() * x2;
        let dn = x2.dot(&dp);
        let dd = 2.0 * (p.x * dp.x + p.y * dp.y + q.x * dq.x + q.y * dq.y);
        dn / sd - n * dd / (2.0 * d * sd)
    };
    let jl1 = so3_left_jacobian(&(omega1 * tau)) * tau;
    let jl2 = so3_left_jacobian(&(omega2 * tau2)) * tau2;
    let mut jac = SVector::<f64, 12>::zeros();
    for k in 0..3 {
        // ω_1: R_1 -> exp([g]_x) R_1 gives R_i -> R_i (I - [g]_x)
        let g = jl1.column(k).into_owned();
        let dri = -ri * skew(&g);
        let dti = -dri * t1 * tau;
        jac[k] = grad(&(skew(&dti) * ri + sti * dri));
        // t_1
        let dti = -(ri.column(k) * tau);
        jac[3 + k] = grad(&(skew(&dti) * ri));
        // ω_2: R_2 -> exp([h]_x) R_2
        let h = jl2.column(k).into_owned();
        let dri = rr * skew(&h) * rr.transpose() * ri;
        let dti = -dri * t1 * tau;
        jac[6 + k] = grad(&(skew(&dti) * ri + sti * dri));
        // t_2
        let dti = rr.column(k) * tau2;
        jac[9 + k] = grad(&(skew(&dti) * ri));
    }
    (r, jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::epipolar::{essential_matrix, sampson_distance};
    use crate::geometry::{MotionEstimate, MotionModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
        Vector3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
    }

    fn rand_corr(rng: &mut ChaCha8Rng) -> Correspondence {
        Correspondence::from_coords(
            rng.random_range(-0.7..0.7),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.7..0.7),
            rng.random_range(-0.5..0.5),
        )
    }

    #[test]
    fn constant_motion_matches_the_epipolar_module() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rig = RigConfig::mirrored().with_baseline(Vector3::new(0.05, 0.01, 0.0));
        for _ in 0..50 {
            let c = rand_corr(&mut rng);
            let (w, t) = (rv(&mut rng, 0.4), rv(&mut rng, 1.0));
            let m = MotionEstimate::new(MotionModel::SixDofBaseline, w, t, true);
            let e1 = rowpair_essential(&c, &rig, &w, &t, &w, &t);
            let e2 = essential_matrix(&c, &m, &rig, false);
            assert!((e1 - e2).abs().max() < 1e-12);
            let (r, _) = sampson_residual(&c, &rig, &w, &t, &w, &t);
            assert!((r.abs() - sampson_distance(&c, &m, &rig)).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rig = RigConfig::mirrored();
        let h = 1e-6;
        for _ in 0..100 {
            let c = rand_corr(&mut rng);
            let (w1, w2) = (rv(&mut rng, 0.5), rv(&mut rng, 0.5));
            let (_, j) = rotation_residual(&c, &rig, &w1, &w2);
            let mut fdj = Matrix2x6::zeros();
            for k in 0..6 {
                let (mut a1, mut a2, mut b1, mut b2) = (w1, w2, w1, w2);
                if k < 3 {
                    a1[k] += h;
                    b1[k] -= h;
                } else {
                    a2[k - 3] += h;
                    b2[k - 3] -= h;
                }
                let fd = (rotation_residual(&c, &rig, &a1, &a2).0 - rotation_residual(&c, &rig, &b1, &b2).0) / (2.0 * h);
                fdj.set_column(k, &fd);
            }
            assert!((fdj - j).norm() <= 1e-6 * j.norm(), "{fdj} vs {j}");
        }
    }

    #[test]
    fn sampson_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rig = RigConfig::mirrored().with_baseline(Vector3::new(0.03, 0.0, 0.01));
        let h = 1e-6;
        for _ in 0..100 {
            let c = rand_corr(&mut rng);
            let x: Vec<Vector3<f64>> = vec![rv(&mut rng, 0.5), rv(&mut rng, 1.0), rv(&mut rng, 0.5), rv(&mut rng, 1.0)];
            let f = |x: &[Vector3<f64>]| sampson_residual(&c, &rig, &x[0], &x[1], &x[2], &x[3]).0;
            let (_, j) = sampson_residual(&c, &rig, &x[0], &x[1], &x[2], &x[3]);
            let fd = SVector::<f64, 12>::from_fn(|k, _| {
                let (mut a, mut b) = (x.clone(), x.clone());
                a[k / 3][k % 3] += h;
                b[k / 3][k % 3] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            });
            assert!((fd - j).norm() <= 1e-6 * j.norm(), "{fd} vs {j}");
        }
    }
}
