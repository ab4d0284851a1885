//! General-motion solvers.
//!
//! Zero baseline: with `t = (1 - x, x, y)` each correspondence gives
//! `[c_y - c_x, c_z, c_x](ω) · (x, y, 1) = 0`, five rows of `M(ω)`. The
//! translation direction is read off the null vector of `[c_x c_y c_z](ω*)`,
//! which avoids dividing by `t_x + t_y` before the gauge is applied.
//!
//! Known baseline: `[c, e](ω) · (t, 1) = 0` over six correspondences; the
//! homogeneous coordinate fixes the metric scale.

use nalgebra::{DMatrix, Matrix6, Vector3, Vector6};

use super::epipolar::{constraint_coefficients, constraint_polynomials};
use super::SolverResult;
use crate::error::{Error, Result};
use crate::geometry::{Correspondence, MotionEstimate, MotionModel, RigConfig};
use crate::polysolve::{hidden_variable_eliminate, solve_baseline_system, solve_cubic_system, Poly3, PolyVec3};

/// `|(t_x, t_y)| / |t|` below this makes the `t_x + t_y = 1` gauge unusable.
pub const GAUGE_TOL: f64 = 1e-9;
/// `M(0)` entries below this are treated as a static scene.
pub const STATIC_TOL: f64 = 1e-12;

/// The `5x3` matrix `M(ω)` acting on `(x, y, 1)`.
pub fn sixdof_matrix(corrs: &[Correspondence], rig: &RigConfig) -> Vec<Vec<Poly3>> {
    let rig0 = rig.with_baseline(Vector3::zeros());
    corrs
        .iter()
        .map(|c| {
            let (cv, _) = constraint_polynomials(c, &rig0);
            let [cx, cy, cz] = cv.0;
            vec![cy - cx, cz, cx]
        })
        .collect()
}

/// The `6x4` matrix acting on `(t, 1)`.
pub fn baseline_matrix(corrs: &[Correspondence], rig: &RigConfig) -> Vec<Vec<Poly3>> {
    corrs
        .iter()
        .map(|c| {
            let (cv, e) = constraint_polynomials(c, rig);
            vec![cv.0[0], cv.0[1], cv.0[2], e]
        })
        .collect()
}

fn scale_free_residual(corrs: &[Correspondence], omega: &Vector3<f64>, t: &Vector3<f64>, rig: &RigConfig) -> f64 {
    corrs
        .iter()
        .map(|c| {
            let (cv, e) = constraint_coefficients(c, omega, rig, true);
            let den = cv.norm() * t.norm() + e.abs();
            if den == 0.0 {
                0.0
            } else {
                (cv.dot(t) + e).abs() / den
            }
        })
        .fold(0.0, f64::max)
}

/// Newton steps on `c_r(ω) · t + e_r(ω) = 0` in `(ω, t)`. Elimination loses
/// a few digits; the original rows recover them. Without a baseline the
/// scale is pinned by `t0 · t = |t0|²`. Steps are kept only while the
/// residual drops and stay local to the root.
fn polish(rows: &[(PolyVec3, Poly3)], omega: Vector3<f64>, t: Vector3<f64>, metric: bool) -> (Vector3<f64>, Vector3<f64>) {
    let t0 = t;
    let eval = |w: &Vector3<f64>, t: &Vector3<f64>| -> Vector6<f64> {
        let mut f = Vector6::zeros();
        for (r, (c, e)) in rows.iter().enumerate().take(if metric { 6 } else { 5 }) {
            f[r] = c.eval(w).dot(t) + e.eval(w);
        }
        if !metric {
            f[5] = t0.dot(t) - t0.norm_squared();
        }
        f
    };
    let (mut w, mut t) = (omega, t);
    let mut f = eval(&w, &t);
    for _ in 0..4 {
        let norm = f.norm();
        if norm == 0.0 {
            break;
        }
        let mut j = Matrix6::zeros();
        for (r, (c, e)) in rows.iter().enumerate().take(if metric { 6 } else { 5 }) {
            let g = c.0[0].gradient(&w) * t.x + c.0[1].gradient(&w) * t.y + c.0[2].gradient(&w) * t.z + e.gradient(&w);
            let cv = c.eval(&w);
            for k in 0..3 {
                j[(r, k)] = g[k];
                j[(r, 3 + k)] = cv[k];
            }
        }
        if !metric {
            for k in 0..3 {
                j[(5, 3 + k)] = t0[k];
            }
        }
        let Some(step) = j.lu().solve(&f) else { break };
        let (dw, dt) = (step.fixed_rows::<3>(0).into_owned(), step.fixed_rows::<3>(3).into_owned());
        if !(dw.norm() <= 1e-3 * (1.0 + w.norm()) && dt.norm() <= 1e-3 * t.norm()) {
            break;
        }
        let (nw, nt) = (w - dw, t - dt);
        let nf = eval(&nw, &nt);
        if !(nf.norm() < norm) {
            break;
        }
        (w, t, f) = (nw, nt, nf);
    }
    (w, t)
}

fn smallest_right_singular_vector(m: DMatrix<f64>) -> Option<nalgebra::DVector<f64>> {
    let n = m.ncols();
    // pad to square so that the thin SVD exposes the full right basis
    let m = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(&m);
        p
    } else {
        m
    };
    let svd = m.svd(false, true);
    let vt = svd.v_t?;
    let i = svd.singular_values.imin();
    Some(vt.row(i).transpose())
}

/// Up to ten `(ω, t)` candidates from five correspondences, `t` up to scale.
pub fn solve_6dof(corrs: &[Correspondence], rig: &RigConfig) -> Result<SolverResult> {
    if corrs.len() != 5 {
        return Err(Error::InsufficientCorrespondences { needed: 5, got: corrs.len() });
    }
    let rig0 = rig.with_baseline(Vector3::zeros());
    let m = sixdof_matrix(corrs, rig);
    let static_scene = m.iter().flatten().all(|p| p.coeffs[0].abs() <= STATIC_TOL);
    if static_scene {
        let est = MotionEstimate::new(MotionModel::SixDof, Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0), false);
        return Ok(SolverResult::single(est, 0.0));
    }
    let system = hidden_variable_eliminate(&m)?;
    let roots = solve_cubic_system(&system)?;
    let rows: Vec<(PolyVec3, Poly3)> = corrs.iter().map(|c| constraint_polynomials(c, &rig0)).collect();
    let mut pairs = Vec::new();
    let mut gauge_failures = 0;
    for omega in roots {
        let c = DMatrix::from_fn(5, 3, |r, k| constraint_coefficients(&corrs[r], &omega, &rig0, true).0[k]);
        let Some(n) = smallest_right_singular_vector(c) else { continue };
        let t = Vector3::new(n[0], n[1], n[2]);
        let (omega, t) = polish(&rows, omega, t, false);
        if t.x.hypot(t.y) <= GAUGE_TOL * t.norm() {
            gauge_failures += 1;
            continue;
        }
        let res = scale_free_residual(corrs, &omega, &t, &rig0);
        pairs.push((MotionEstimate::new(MotionModel::SixDof, omega, t, false), res));
    }
    if pairs.is_empty() && gauge_failures > 0 {
        return Err(Error::GaugeDegenerate);
    }
    Ok(SolverResult::new(pairs))
}

/// Up to twenty metric `(ω, t)` candidates from six correspondences and a
/// known baseline. A zero baseline falls back to the five-point solver on the
/// first five correspondences, ranked on all six.
pub fn solve_6dof_baseline(corrs: &[Correspondence], rig: &RigConfig) -> Result<SolverResult> {
    if corrs.len() != 6 {
        return Err(Error::InsufficientCorrespondences { needed: 6, got: corrs.len() });
    }
    if !rig.has_baseline() {
        let r = solve_6dof(&corrs[..5], rig)?;
        let pairs = r
            .candidates
            .iter()
            .map(|m| {
                let m = m.with_model(MotionModel::SixDofBaseline);
                (m, scale_free_residual(corrs, &m.omega, &m.t, rig))
            })
            .collect();
        return Ok(SolverResult::new(pairs));
    }
    let m = baseline_matrix(corrs, rig);
    let roots = solve_baseline_system(&m)?;
    let rows: Vec<(PolyVec3, Poly3)> = corrs.iter().map(|c| constraint_polynomials(c, rig)).collect();
    let mut pairs = Vec::new();
    for omega in roots {
        let a = DMatrix::from_fn(6, 4, |r, k| {
            let (cv, e) = constraint_coefficients(&corrs[r], &omega, rig, true);
            if k < 3 {
                cv[k]
            } else {
                e
            }
        });
        let Some(n) = smallest_right_singular_vector(a) else { continue };
        if n[3].abs() <= 1e-12 * n.norm() {
            continue;
        }
        let (omega, t) = polish(&rows, omega, Vector3::new(n[0], n[1], n[2]) / n[3], true);
        let res = scale_free_residual(corrs, &omega, &t, rig);
        pairs.push((MotionEstimate::new(MotionModel::SixDofBaseline, omega, t, true), res));
    }
    Ok(SolverResult::new(pairs))
}
