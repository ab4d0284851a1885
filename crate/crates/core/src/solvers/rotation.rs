//! Pure-rotation solver.
//!
//! For `t = 0, b = 0` each correspondence satisfies, to first order in `ω`,
//!
//! `w × (I + τ'[ω]_x)(I - τ[ω]_x) u = 0`, `w = R_rᵀ u'`,
//!
//! three quadratics of rank two. Two correspondences give six; the three
//! most independent are handed to the three-quadratics solver and every
//! root is ranked on all six.

use nalgebra::{SVector, Vector3};

use super::SolverResult;
use crate::error::{Error, Result};
use crate::geometry::{Correspondence, MotionEstimate, RigConfig};
use crate::polysolve::e3q3::relative_residual;
use crate::polysolve::{solve_3q3, Poly3, PolyVec3};

/// The three quadratics contributed by one correspondence.
pub fn rotation_equations(corr: &Correspondence, rig: &RigConfig) -> [Poly3; 3] {
    let tau = rig.time(corr.first.v);
    let tau2 = rig.time(corr.second.v);
    let u = PolyVec3::constant(&corr.first.homogeneous());
    let w = PolyVec3::constant(&(rig.relative_rotation.transpose() * corr.second.homogeneous()));
    let om = PolyVec3::unknowns();
    let wu = om.cross(&u);
    let wwu = om.cross(&wu);
    let q = u + wu.scale(tau2 - tau) - wwu.scale(tau2 * tau);
    w.cross(&q).0
}

fn normalized_row(p: &Poly3) -> SVector<f64, 10> {
    let row = SVector::<f64, 10>::from_iterator(p.coeffs[..10].iter().copied());
    let n = row.norm();
    if n > 0.0 {
        row / n
    } else {
        row
    }
}

/// Indices of the three most independent equations, by greedy pivoted
/// Gram-Schmidt on the normalized coefficient rows.
pub fn select_equations(eqs: &[Poly3]) -> [usize; 3] {
    let rows: Vec<SVector<f64, 10>> = eqs.iter().map(normalized_row).collect();
    let mut basis: Vec<SVector<f64, 10>> = Vec::new();
    let mut chosen = [0usize; 3];
    for slot in chosen.iter_mut() {
        let mut best = (f64::NEG_INFINITY, 0usize, SVector::<f64, 10>::zeros());
        for (i, r) in rows.iter().enumerate() {
            let mut res = *r;
            for b in &basis {
                res -= b * b.dot(&res);
            }
            let n = res.norm();
            if n > best.0 {
                best = (n, i, res);
            }
        }
        *slot = best.1;
        let n = best.2.norm();
        basis.push(if n > 0.0 { best.2 / n } else { best.2 });
    }
    chosen
}

/// Up to eight candidate angular velocities from two correspondences.
pub fn solve_rotation(corrs: &[Correspondence], rig: &RigConfig) -> Result<SolverResult> {
    if corrs.len() != 2 {
        return Err(Error::InsufficientCorrespondences { needed: 2, got: corrs.len() });
    }
    let eqs: Vec<Poly3> = corrs.iter().flat_map(|c| rotation_equations(c, rig)).collect();
    let pick = select_equations(&eqs);
    let system = [eqs[pick[0]], eqs[pick[1]], eqs[pick[2]]];
    let roots = solve_3q3(&system)?;
    let pairs = roots
        .into_iter()
        .map(|w: Vector3<f64>| {
            let res = eqs.iter().map(|p| relative_residual(p, &w)).fold(0.0, f64::max);
            (MotionEstimate::rotation(w), res)
        })
        .collect();
    Ok(SolverResult::new(pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{project_rs, GenerationMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn static_pair_contains_zero() {
        let rig = RigConfig::mirrored();
        let corrs = [
            Correspondence::from_coords(0.1, 0.2, -0.1, -0.2),
            Correspondence::from_coords(-0.3, -0.25, 0.3, 0.25),
        ];
        let r = solve_rotation(&corrs, &rig).unwrap();
        let zero = r.iter().find(|(m, _)| m.omega.norm() < 1e-10);
        assert!(zero.is_some_and(|(_, res)| res <= 1e-10));
    }

    #[test]
    fn recovers_rotation_on_factored_data() {
        let rig = RigConfig::mirrored();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        // 15 degrees per frame over a 1.024 row frame
        let speed = 15f64.to_radians() / 1.024;
        for _ in 0..300 {
            let axis: Vector3<f64> = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
            let m = MotionEstimate::rotation(axis * speed);
            let corrs: Vec<Correspondence> = (0..2)
                .map(|_| {
                    let z = rng.random_range(3.0..10.0);
                    let x = Vector3::new(rng.random_range(-0.7..0.7) * z, rng.random_range(-0.5..0.5) * z, z);
                    let (a, b) = project_rs(&x, &m, &rig, GenerationMode::Factored).unwrap();
                    Correspondence::new(a, b)
                })
                .collect();
            let r = solve_rotation(&corrs, &rig).unwrap();
            assert!(r.len() <= 8);
            assert!(
                r.candidates.iter().any(|c| (c.omega - m.omega).norm() < 1e-6),
                "truth {:?} not in {:?}",
                m.omega,
                r.candidates
            );
        }
    }

    #[test]
    fn candidates_satisfy_selected_equations() {
        let rig = RigConfig::mirrored();
        let corrs = [
            Correspondence::from_coords(0.12, 0.31, -0.2, -0.28),
            Correspondence::from_coords(-0.4, -0.1, 0.35, 0.16),
        ];
        let eqs: Vec<Poly3> = corrs.iter().flat_map(|c| rotation_equations(c, &rig)).collect();
        let pick = select_equations(&eqs);
        assert!(pick[0] != pick[1] && pick[1] != pick[2] && pick[0] != pick[2]);
        let r = solve_rotation(&corrs, &rig).unwrap();
        for m in &r.candidates {
            for &i in &pick {
                assert!(relative_residual(&eqs[i], &m.omega) <= 1e-6);
            }
        }
        for w in r.residuals.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }
}
