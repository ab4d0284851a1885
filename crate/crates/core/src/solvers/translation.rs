//! Closed-form and linear solvers for pure translation.
//!
//! With `ŵ` the camera-2 point rotated into camera 1's orientation and
//! dehomogenized, a pure translation gives per correspondence
//!
//! `λ u = λ_g u_g + τ t`, `λ'' ŵ = λ_g u_g + τ' t`,
//!
//! where `λ''` is the depth along camera 1's optical axis at time `τ'`.

use nalgebra::{DMatrix, SVector, Vector2, Vector3};

use super::SolverResult;
use crate::error::{Error, Result};
use crate::geometry::{Correspondence, ImagePoint, MotionEstimate, MotionModel, RigConfig};

/// Row differences below this are treated as simultaneous.
pub const ROW_EPS: f64 = 1e-12;

/// Result of the single-correspondence x-translation solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxSolution {
    pub gs: ImagePoint,
    /// `t_x / λ`.
    pub ratio: f64,
}

impl TxSolution {
    pub fn estimate(&self) -> MotionEstimate {
        MotionEstimate::new(MotionModel::Tx, Vector3::zeros(), Vector3::new(self.ratio, 0.0, 0.0), false)
    }
}

/// Result of the single-correspondence xy-translation solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxySolution {
    pub gs: ImagePoint,
    /// `(t_x, t_y) / λ`.
    pub ratio: Vector2<f64>,
}

impl TxySolution {
    pub fn estimate(&self) -> MotionEstimate {
        MotionEstimate::new(
            MotionModel::Txy,
            Vector3::zeros(),
            Vector3::new(self.ratio.x, self.ratio.y, 0.0),
            false,
        )
    }
}

fn rotated_second(corr: &Correspondence, rig: &RigConfig) -> Result<ImagePoint> {
    rig.second_in_first_orientation(&corr.second)
        .ok_or_else(|| Error::NumericalFailure("camera-2 ray is parallel to the image plane".into()))
}

/// Pure x-translation from one correspondence.
///
/// The GS point is the x-midpoint of the two observations (after rotating
/// camera 2 into camera 1's orientation). `row_tolerance` bounds the allowed
/// row disagreement `|v - ŵ_y|`.
pub fn solve_tx(corr: &Correspondence, rig: &RigConfig, row_tolerance: f64) -> Result<TxSolution> {
    let w = rotated_second(corr, rig)?;
    let dv = (corr.first.v - w.v).abs();
    if dv > row_tolerance {
        return Err(Error::InconsistentRows(dv));
    }
    let dt = rig.time(corr.first.v) - rig.time(corr.second.v);
    if dt.abs() < ROW_EPS {
        return Err(Error::DegenerateRows);
    }
    Ok(TxSolution {
        gs: ImagePoint::new(0.5 * (corr.first.u + w.u), corr.first.v),
        ratio: (corr.first.u - w.u) / dt,
    })
}

/// Translation parallel to the image plane from one correspondence.
pub fn solve_txy(corr: &Correspondence, rig: &RigConfig) -> Result<TxySolution> {
    let w = rotated_second(corr, rig)?;
    let tau = rig.time(corr.first.v);
    let dt = tau - rig.time(corr.second.v);
    if dt.abs() < ROW_EPS {
        return Err(Error::DegenerateRows);
    }
    let ratio = Vector2::new(corr.first.u - w.u, corr.first.v - w.v) / dt;
    Ok(TxySolution {
        gs: ImagePoint::new(corr.first.u - tau * ratio.x, corr.first.v - tau * ratio.y),
        ratio,
    })
}

/// Full translation direction from two correspondences.
///
/// Unknowns `(t, λ_1, λ''_1, λ_2, λ''_2)`; each correspondence contributes
/// `(τ - τ') t - λ u + λ'' ŵ = 0`. The null vector is scaled to `λ_1 = 1`.
pub fn solve_txyz(corrs: &[Correspondence], rig: &RigConfig) -> Result<SolverResult> {
    if corrs.len() != 2 {
        return Err(Error::InsufficientCorrespondences { needed: 2, got: corrs.len() });
    }
    let mut a = DMatrix::<f64>::zeros(7, 7);
    for (k, c) in corrs.iter().enumerate() {
        let u = c.first.homogeneous();
        let w = rig.relative_rotation.transpose() * c.second.homogeneous();
        if w.z.abs() < 1e-300 {
            return Err(Error::NumericalFailure("camera-2 ray is parallel to the image plane".into()));
        }
        let w = w / w.z;
        let dt = rig.time(c.first.v) - rig.time(c.second.v);
        for r in 0..3 {
            a[(3 * k + r, r)] = dt;
            a[(3 * k + r, 3 + 2 * k)] = -u[r];
            a[(3 * k + r, 4 + 2 * k)] = w[r];
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::NumericalFailure("svd failed".into()))?;
    let s = &svd.singular_values;
    let smax = s.max();
    let null: Vec<usize> = (0..7).filter(|&i| s[i] <= 1e-10 * smax).collect();
    let null: Vec<usize> = if null.is_empty() { vec![s.imin()] } else { null };
    if null.len() > 1 {
        let t_part: f64 = null
            .iter()
            .map(|&i| (0..3).map(|c| vt[(i, c)].powi(2)).sum::<f64>())
            .sum();
        if t_part.sqrt() <= 1e-8 {
            // static: every null direction only scales depths
            let est = MotionEstimate::new(MotionModel::Txyz, Vector3::zeros(), Vector3::zeros(), false);
            return Ok(SolverResult::single(est, 0.0));
        }
        return Err(Error::RankDeficient(null.len()));
    }
    let n: SVector<f64, 7> = SVector::from_iterator(vt.row(null[0]).iter().copied());
    let lambdas = [n[3], n[4], n[5], n[6]];
    let sign = if lambdas.iter().all(|l| *l > 0.0) {
        1.0
    } else if lambdas.iter().all(|l| *l < 0.0) {
        -1.0
    } else {
        return Err(Error::CheiralityFailure);
    };
    let n = n * (sign / n[3].abs());
    let t = Vector3::new(n[0], n[1], n[2]);
    let est = MotionEstimate::new(MotionModel::Txyz, Vector3::zeros(), t, false);
    // residual of the normalized system on the minimal set
    let residual = s[null[0]] / smax;
    Ok(SolverResult::single(est, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{project_gs, project_rs, GenerationMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rig() -> RigConfig {
        RigConfig::mirrored()
    }

    #[test]
    fn tx_examples() {
        let s = solve_tx(&Correspondence::from_coords(0.3, 0.2, -0.3, -0.2), &rig(), 1e-9).unwrap();
        assert_eq!(s.gs, ImagePoint::new(0.3, 0.2));
        assert_eq!(s.ratio, 0.0);
        // raw camera-2 frame: u' = 3 is -3 after rotation into camera 1
        let s = solve_tx(&Correspondence::from_coords(1.0, 0.2, 3.0, -0.2), &rig(), 1e-9).unwrap();
        assert!((s.gs.u + 1.0).abs() < 1e-15 && s.gs.v == 0.2);
        assert!((s.ratio - 10.0).abs() < 1e-12);
        assert!(matches!(
            solve_tx(&Correspondence::from_coords(1.0, 0.2, 3.0, 0.1), &rig(), 1e-9),
            Err(Error::InconsistentRows(_))
        ));
        // same example with camera 2 already flipped (identity rig)
        let flipped = RigConfig::new(nalgebra::Matrix3::identity(), Vector3::zeros(), 0.0).unwrap();
        let s = solve_tx(&Correspondence::from_coords(1.0, 0.2, 3.0, 0.2), &flipped, 1e-9);
        assert!(matches!(s, Err(Error::DegenerateRows)));
    }

    #[test]
    fn txy_examples() {
        let s = solve_txy(&Correspondence::from_coords(0.5, 0.3, -0.5, -0.3), &rig()).unwrap();
        assert_eq!(s.gs, ImagePoint::new(0.5, 0.3));
        let s = solve_txy(&Correspondence::from_coords(0.5, 0.3, 0.1, 0.1), &rig()).unwrap();
        // u_g = -(u v' + u' v)/(v - v'), v_g = -2 v v'/(v - v')
        assert!((s.gs.u - (-(0.5 * 0.1 + 0.1 * 0.3) / 0.2)).abs() < 1e-14);
        assert!((s.gs.v - (-2.0 * 0.3 * 0.1 / 0.2)).abs() < 1e-14);
        assert!((s.gs.u + 0.4).abs() < 1e-14 && (s.gs.v + 0.3).abs() < 1e-14);
        assert_eq!(
            solve_txy(&Correspondence::from_coords(0.5, 0.3, 0.1, 0.3), &rig()),
            Err(Error::DegenerateRows)
        );
    }

    fn random_point(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        let z = rng.random_range(4.0..12.0);
        Vector3::new(rng.random_range(-0.6..0.6) * z, rng.random_range(-0.45..0.45) * z, z)
    }

    #[test]
    fn synthetic_tx_and_txy_scenes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = random_point(&mut rng);
            let (g, _) = project_gs(&x, &rig()).unwrap();
            let tx = MotionEstimate::new(MotionModel::Tx, Vector3::zeros(), Vector3::new(0.7, 0.0, 0.0), true);
            let (p1, p2) = project_rs(&x, &tx, &rig(), GenerationMode::Exact).unwrap();
            let c = Correspondence::new(p1, p2);
            if let Ok(s) = solve_tx(&c, &rig(), 1e-9) {
                assert!(s.gs.distance(&g) < 1e-10);
                assert!((s.ratio - 0.7 / x.z).abs() < 1e-9);
            }
            let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0);
            let txy = MotionEstimate::new(MotionModel::Txy, Vector3::zeros(), t, true);
            let (p1, p2) = project_rs(&x, &txy, &rig(), GenerationMode::Exact).unwrap();
            let s = solve_txy(&Correspondence::new(p1, p2), &rig()).unwrap();
            assert!(s.gs.distance(&g) < 1e-10);
            assert!((s.ratio - Vector2::new(t.x, t.y) / x.z).norm() < 1e-9);
        }
    }

    #[test]
    fn txyz_recovers_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let m = MotionEstimate::new(MotionModel::Txyz, Vector3::zeros(), t, true);
            let corrs: Vec<Correspondence> = (0..2)
                .map(|_| {
                    let (a, b) = project_rs(&random_point(&mut rng), &m, &rig(), GenerationMode::Exact).unwrap();
                    Correspondence::new(a, b)
                })
                .collect();
            let r = solve_txyz(&corrs, &rig()).unwrap();
            // the t_x + t_y gauge does not preserve the sign of t
            let est = r.candidates[0].t;
            let angle = est.normalize().cross(&t.normalize()).norm().asin();
            assert!(angle < 1e-8, "angle {angle}");
        }
    }

    #[test]
    fn txyz_pure_forward_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = MotionEstimate::new(MotionModel::Txyz, Vector3::zeros(), Vector3::new(0.0, 0.0, 0.5), true);
        let corrs: Vec<Correspondence> = (0..2)
            .map(|_| {
                let (a, b) = project_rs(&random_point(&mut rng), &m, &rig(), GenerationMode::Exact).unwrap();
                Correspondence::new(a, b)
            })
            .collect();
        let r = solve_txyz(&corrs, &rig()).unwrap();
        assert!((r.candidates[0].t - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-8);
    }

    #[test]
    fn txyz_static_and_degenerate() {
        let corrs = [
            Correspondence::from_coords(0.1, 0.2, -0.1, -0.2),
            Correspondence::from_coords(-0.3, 0.1, 0.3, -0.1),
        ];
        let r = solve_txyz(&corrs, &rig()).unwrap();
        assert_eq!(r.candidates[0].t, Vector3::zeros());
        assert!(matches!(
            solve_txyz(&corrs[..1], &rig()),
            Err(Error::InsufficientCorrespondences { .. })
        ));
    }
}
