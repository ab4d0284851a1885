//! Nonlinear refinement of motion estimates.
//!
//! Rotation-only estimates minimize the reprojection of camera 2's points
//! into camera 1; everything with a translation minimizes the Sampson error
//! of the row-pair epipolar constraint. Both use exact rotations. A single
//! constant motion is the one-knot case of [`KnotMotion`], so the single and
//! multi-knot refiners evaluate literally the same cost.

pub mod costs;
pub mod knots;
pub mod lm;

use nalgebra::{DMatrix, DVector, Vector3};

pub use knots::KnotMotion;
pub use lm::{minimize, LmConfig, LmReport, Problem};

use crate::error::{Error, Result};
use crate::geometry::{Correspondence, MotionEstimate, MotionModel, RigConfig};
use costs::{rotation_residual, sampson_residual};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// Reprojection of the rotation-only model.
    Rotation,
    /// Sampson error of the row-pair epipolar constraint.
    Sampson,
}

impl CostKind {
    pub fn for_model(model: MotionModel) -> Self {
        if model == MotionModel::Rot {
            CostKind::Rotation
        } else {
            CostKind::Sampson
        }
    }

    fn block(&self) -> usize {
        match self {
            CostKind::Rotation => 2,
            CostKind::Sampson => 1,
        }
    }
}

/// Which velocity components move during refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamMask {
    pub omega: bool,
    pub t: [bool; 3],
}

impl ParamMask {
    pub fn for_model(model: MotionModel) -> Self {
        match model {
            MotionModel::Tx => Self { omega: false, t: [true, false, false] },
            MotionModel::Txy => Self { omega: false, t: [true, true, false] },
            MotionModel::Txyz => Self { omega: false, t: [true; 3] },
            MotionModel::Rot => Self { omega: true, t: [false; 3] },
            MotionModel::SixDof | MotionModel::SixDofBaseline => Self { omega: true, t: [true; 3] },
        }
    }
}

/// Outcome of a refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Refined<T> {
    pub motion: T,
    pub report: LmReport,
}

/// Normalizes the stacked knot translations with the gauge of their mean, so
/// that one knot reduces to the usual `t_x + t_y = 1` rule.
fn gauge_knots(knots: &mut [(f64, Vector3<f64>, Vector3<f64>)]) {
    let mean = knots.iter().map(|k| k.2).sum::<Vector3<f64>>() / knots.len() as f64;
    let n = mean.norm();
    let s = mean.x + mean.y;
    let div = if n == 0.0 || !n.is_finite() {
        let stacked = knots.iter().map(|k| k.2.norm_squared()).sum::<f64>().sqrt();
        if stacked == 0.0 {
            return;
        }
        stacked
    } else if s.abs() > 1e-6 * n {
        s
    } else {
        n
    };
    for k in knots.iter_mut() {
        k.2 /= div;
    }
}

/// The knot refinement problem. Parameters are knot velocities; the local
/// chart is additive in the free components, minus the global scale of the
/// translations when that scale is unobservable.
pub struct KnotProblem<'a> {
    corrs: &'a [Correspondence],
    rig: &'a RigConfig,
    rows: Vec<f64>,
    cost: CostKind,
    mask: ParamMask,
    scale_known: bool,
}

impl<'a> KnotProblem<'a> {
    pub fn new(corrs: &'a [Correspondence], rig: &'a RigConfig, knots: &KnotMotion, model: MotionModel, scale_known: bool) -> Self {
        let cost = CostKind::for_model(model);
        let mut mask = ParamMask::for_model(model);
        if cost == CostKind::Rotation {
            mask.t = [false; 3];
        }
        Self {
            corrs,
            rig,
            rows: knots.knots.iter().map(|k| k.0).collect(),
            cost,
            mask,
            scale_known: scale_known || rig.has_baseline(),
        }
    }

    fn knots_of(&self, p: &[(f64, Vector3<f64>, Vector3<f64>)]) -> KnotMotion {
        KnotMotion { knots: p.to_vec() }
    }

    fn raw_dim(&self) -> usize {
        6 * self.rows.len()
    }

    fn free_t(&self) -> usize {
        self.mask.t.iter().filter(|b| **b).count()
    }

    /// Columns map local coordinates to raw per-knot `(ω, t)` changes.
    fn chart(&self, p: &[(f64, Vector3<f64>, Vector3<f64>)]) -> DMatrix<f64> {
        let k = self.rows.len();
        let mut cols: Vec<DVector<f64>> = Vec::new();
        if self.mask.omega {
            for i in 0..k {
                for c in 0..3 {
                    let mut e = DVector::zeros(self.raw_dim());
                    e[6 * i + c] = 1.0;
                    cols.push(e);
                }
            }
        }
        let mut tcols: Vec<DVector<f64>> = Vec::new();
        for i in 0..k {
            for c in 0..3 {
                if self.mask.t[c] {
                    let mut e = DVector::zeros(self.raw_dim());
                    e[6 * i + 3 + c] = 1.0;
                    tcols.push(e);
                }
            }
        }
        if !self.scale_known {
            let mut dir = DVector::zeros(self.raw_dim());
            for (i, kn) in p.iter().enumerate() {
                for c in 0..3 {
                    dir[6 * i + 3 + c] = kn.2[c];
                }
            }
            let n = dir.norm();
            if n > 0.0 {
                dir /= n;
                // complement of the scale direction within the free t space
                let mut basis: Vec<DVector<f64>> = vec![dir];
                let mut out = Vec::new();
                for e in tcols {
                    let mut v = e;
                    for b in &basis {
                        let d = b.dot(&v);
                        v.axpy(-d, b, 1.0);
                    }
                    let vn = v.norm();
                    if vn > 1e-8 {
                        v /= vn;
                        basis.push(v.clone());
                        out.push(v);
                    }
                }
                tcols = out;
            }
        }
        cols.extend(tcols);
        let mut m = DMatrix::zeros(self.raw_dim(), cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_column(j, c);
        }
        m
    }

    fn blocks(&self, p: &[(f64, Vector3<f64>, Vector3<f64>)], with_jacobian: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
        let km = self.knots_of(p);
        let b = self.cost.block();
        let mut r = DVector::zeros(b * self.corrs.len());
        let mut j = with_jacobian.then(|| DMatrix::zeros(b * self.corrs.len(), self.raw_dim()));
        for (i, c) in self.corrs.iter().enumerate() {
            let w1 = km.weights(c.first.v);
            let w2 = km.weights(c.second.v);
            let (o1, t1) = km.velocity_at_row(c.first.v);
            let (o2, t2) = km.velocity_at_row(c.second.v);
            match self.cost {
                CostKind::Rotation => {
                    let (res, jac) = rotation_residual(c, self.rig, &o1, &o2);
                    r.fixed_rows_mut::<2>(2 * i).copy_from(&res);
                    if let Some(j) = j.as_mut() {
                        for (side, w) in [(0usize, w1), (3usize, w2)] {
                            for (kn, wt) in w {
                                for rr in 0..2 {
                                    for cc in 0..3 {
                                        j[(2 * i + rr, 6 * kn + cc)] += wt * jac[(rr, side + cc)];
                                    }
                                }
                            }
                        }
                    }
                }
                CostKind::Sampson => {
                    let (res, jac) = sampson_residual(c, self.rig, &o1, &t1, &o2, &t2);
                    r[i] = res;
                    if let Some(j) = j.as_mut() {
                        for (side, w) in [(0usize, w1), (6usize, w2)] {
                            for (kn, wt) in w {
                                for cc in 0..6 {
                                    j[(i, 6 * kn + cc)] += wt * jac[side + cc];
                                }
                            }
                        }
                    }
                }
            }
        }
        (r, j)
    }
}

type Knots = Vec<(f64, Vector3<f64>, Vector3<f64>)>;

impl Problem for KnotProblem<'_> {
    type Params = Knots;

    fn dof(&self) -> usize {
        let k = self.rows.len();
        let om = if self.mask.omega { 3 * k } else { 0 };
        let t = self.free_t() * k;
        om + if self.scale_known || t == 0 { t } else { t - 1 }
    }

    fn block_size(&self) -> usize {
        self.cost.block()
    }

    fn residuals(&self, p: &Knots) -> DVector<f64> {
        self.blocks(p, false).0
    }

    fn jacobian(&self, p: &Knots) -> DMatrix<f64> {
        let raw = self.blocks(p, true).1.expect("jacobian requested");
        raw * self.chart(p)
    }

    fn retract(&self, p: &Knots, delta: &DVector<f64>) -> Knots {
        let step = self.chart(p) * delta;
        let mut out = p.clone();
        for (i, kn) in out.iter_mut().enumerate() {
            for c in 0..3 {
                kn.1[c] += step[6 * i + c];
                kn.2[c] += step[6 * i + 3 + c];
            }
        }
        if !self.scale_known {
            gauge_knots(&mut out);
        }
        out
    }
}

fn check_count(corrs: &[Correspondence], needed: usize) -> Result<()> {
    if corrs.len() < needed {
        return Err(Error::InsufficientCorrespondences { needed, got: corrs.len() });
    }
    Ok(())
}

/// Cost of a knot motion under the cost the model calls for.
pub fn knot_cost(corrs: &[Correspondence], rig: &RigConfig, knots: &KnotMotion, model: MotionModel, truncation: Option<f64>) -> f64 {
    let p = KnotProblem::new(corrs, rig, knots, model, true);
    lm::robust_cost(&p.residuals(&knots.knots), p.block_size(), truncation)
}

/// Cost of a constant motion; same function as [`knot_cost`] with one knot.
pub fn motion_cost(corrs: &[Correspondence], rig: &RigConfig, motion: &MotionEstimate, truncation: Option<f64>) -> f64 {
    knot_cost(corrs, rig, &single_knot(motion), motion.model, truncation)
}

fn single_knot(m: &MotionEstimate) -> KnotMotion {
    KnotMotion { knots: vec![(0.0, m.omega, m.t)] }
}

fn refine_knots_inner(
    corrs: &[Correspondence],
    rig: &RigConfig,
    init: KnotMotion,
    model: MotionModel,
    scale_known: bool,
    cfg: &LmConfig,
) -> Refined<KnotMotion> {
    let p = KnotProblem::new(corrs, rig, &init, model, scale_known);
    let (knots, report) = minimize(&p, init.knots, cfg);
    Refined {
        motion: KnotMotion { knots },
        report,
    }
}

/// Refines a rotation-only estimate.
pub fn refine_rotation(corrs: &[Correspondence], rig: &RigConfig, init: &MotionEstimate, cfg: &LmConfig) -> Result<Refined<MotionEstimate>> {
    check_count(corrs, 2)?;
    let r = refine_knots_inner(corrs, rig, single_knot(init), MotionModel::Rot, true, cfg);
    let (_, w, _) = r.motion.knots[0];
    Ok(Refined {
        motion: MotionEstimate::rotation(w),
        report: r.report,
    })
}

/// Refines an estimate with a translation under the Sampson cost. Components
/// the model excludes stay fixed; scale-free translations stay in the gauge.
pub fn refine_6dof(corrs: &[Correspondence], rig: &RigConfig, init: &MotionEstimate, cfg: &LmConfig) -> Result<Refined<MotionEstimate>> {
    if init.model == MotionModel::Rot {
        return Err(Error::InvalidArgument("rotation-only estimates use refine_rotation".into()));
    }
    check_count(corrs, init.model.minimal_sample())?;
    let r = refine_knots_inner(corrs, rig, single_knot(init), init.model, init.scale_known, cfg);
    let (_, w, t) = r.motion.knots[0];
    Ok(Refined {
        motion: MotionEstimate::new(init.model, w, t, init.scale_known),
        report: r.report,
    })
}

/// Refines either kind of estimate.
pub fn refine_motion(corrs: &[Correspondence], rig: &RigConfig, init: &MotionEstimate, cfg: &LmConfig) -> Result<Refined<MotionEstimate>> {
    match init.model {
        MotionModel::Rot => refine_rotation(corrs, rig, init, cfg),
        _ => refine_6dof(corrs, rig, init, cfg),
    }
}

/// Rows spanned by the observations of both cameras.
pub fn observed_row_range(corrs: &[Correspondence]) -> (f64, f64) {
    corrs.iter().flat_map(|c| [c.first.v, c.second.v]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Refines a motion that varies linearly between `knot_count` rows, all
/// knots starting at `init`.
pub fn refine_multiknot(
    corrs: &[Correspondence],
    rig: &RigConfig,
    init: &MotionEstimate,
    knot_count: usize,
    cfg: &LmConfig,
) -> Result<Refined<KnotMotion>> {
    if knot_count == 0 {
        return Err(Error::InvalidArgument("knot_count must be at least 1".into()));
    }
    check_count(corrs, init.model.minimal_sample())?;
    let knots = if knot_count == 1 {
        single_knot(init)
    } else {
        let (lo, hi) = observed_row_range(corrs);
        KnotMotion::uniform(init, knot_count, lo, hi)?
    };
    Ok(refine_knots_inner(corrs, rig, knots, init.model, init.scale_known, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::gauge_normalize;
    use crate::synth::{generate_scene, undistortion_error, MotionKind, SceneConfig};

    fn scene(kind: MotionKind, sigma: f64, seed: u64) -> crate::synth::SyntheticScene {
        generate_scene(
            &SceneConfig {
                kind,
                sigma_px: sigma,
                num_points: 80,
                ..SceneConfig::default()
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn rotation_at_truth_stays_put() {
        let s = scene(MotionKind::Rotation, 0.0, 1);
        let r = refine_rotation(&s.correspondences, &s.rig, &s.motion, &LmConfig::default()).unwrap();
        assert!(r.report.initial_cost <= 1e-16, "{}", r.report.initial_cost);
        assert!((r.motion.omega - s.motion.omega).norm() < 1e-10);
    }

    #[test]
    fn rotation_converges_from_a_perturbed_start() {
        let s = scene(MotionKind::Rotation, 0.0, 2);
        let init = MotionEstimate::rotation(s.motion.omega * 1.1 + Vector3::new(0.01, -0.01, 0.005));
        let r = refine_rotation(&s.correspondences, &s.rig, &init, &LmConfig::default()).unwrap();
        assert!(r.report.cost <= r.report.initial_cost);
        assert!((r.motion.omega - s.motion.omega).norm() < 1e-8, "{} vs {}", r.motion.omega, s.motion.omega);
    }

    #[test]
    fn sixdof_at_truth_has_zero_cost() {
        let s = scene(MotionKind::General, 0.0, 3);
        let init = MotionEstimate::new(MotionModel::SixDof, s.motion.omega, s.motion.t, false);
        let r = refine_6dof(&s.correspondences, &s.rig, &init, &LmConfig::default()).unwrap();
        assert!(r.report.initial_cost <= 1e-16, "{}", r.report.initial_cost);
        assert!((r.motion.t.x + r.motion.t.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sixdof_converges_and_keeps_gauge() {
        let s = scene(MotionKind::General, 0.0, 4);
        let init = MotionEstimate::new(
            MotionModel::SixDof,
            s.motion.omega * 0.9 + Vector3::new(0.01, 0.0, -0.01),
            s.motion.t + Vector3::new(0.0, 0.0, 0.02 * s.motion.t.norm()),
            false,
        );
        let r = refine_6dof(&s.correspondences, &s.rig, &init, &LmConfig::default()).unwrap();
        assert!(r.report.cost <= r.report.initial_cost);
        assert!((r.motion.t.x + r.motion.t.y - 1.0).abs() < 1e-12);
        assert!((r.motion.omega - s.motion.omega).norm() < 1e-7, "{} vs {}", r.motion.omega, s.motion.omega);
        assert!((r.motion.t - gauge_normalize(&s.motion.t)).norm() < 1e-6);
    }

    #[test]
    fn refinement_reduces_undistortion_error_on_noisy_data() {
        let mut better = 0;
        for seed in 0..10 {
            let s = scene(MotionKind::General, 0.5, 10 + seed);
            let init = MotionEstimate::new(
                MotionModel::SixDof,
                s.motion.omega * 0.85,
                s.motion.t + Vector3::new(0.0, 0.3, 0.1) * s.motion.t.norm(),
                false,
            );
            let r = refine_6dof(&s.correspondences, &s.rig, &init, &LmConfig::default()).unwrap();
            let err = |m: &MotionEstimate| {
                let mut e: Vec<f64> = s
                    .correspondences
                    .iter()
                    .zip(&s.gs)
                    .map(|(c, g)| undistortion_error(c, m, g, &s.rig, s.focal))
                    .collect();
                e.sort_by(f64::total_cmp);
                e[e.len() / 2]
            };
            if err(&r.motion) <= err(&init) {
                better += 1;
            }
        }
        assert_eq!(better, 10);
    }

    #[test]
    fn baseline_refinement_keeps_metric_scale() {
        let s = generate_scene(
            &SceneConfig {
                kind: MotionKind::General,
                sigma_px: 0.0,
                baseline_ratio: 0.05,
                ..SceneConfig::default()
            },
            5,
        )
        .unwrap();
        let init = MotionEstimate::new(MotionModel::SixDofBaseline, s.motion.omega * 0.95, s.motion.t * 1.1, true);
        let r = refine_6dof(&s.correspondences, &s.rig, &init, &LmConfig::default()).unwrap();
        assert!((r.motion.t - s.motion.t).norm() < 1e-6 * s.motion.t.norm().max(1e-3), "{} vs {}", r.motion.t, s.motion.t);
    }

    #[test]
    fn masked_models_keep_excluded_components() {
        let s = scene(MotionKind::Txy, 0.0, 6);
        let init = MotionEstimate::new(MotionModel::Txy, Vector3::zeros(), s.motion.t + Vector3::new(0.0, 0.2, 0.0) * s.motion.t.norm(), false);
        let r = refine_6dof(&s.correspondences, &s.rig, &init, &LmConfig::default()).unwrap();
        assert_eq!(r.motion.omega, Vector3::zeros());
        assert_eq!(r.motion.t.z, 0.0);
        assert!((r.motion.t - gauge_normalize(&s.motion.t)).norm() < 1e-7);
    }

    #[test]
    fn truncated_loss_ignores_outliers() {
        let s = generate_scene(
            &SceneConfig {
                kind: MotionKind::General,
                sigma_px: 0.0,
                outlier_fraction: 0.3,
                ..SceneConfig::default()
            },
            7,
        )
        .unwrap();
        let init = MotionEstimate::new(MotionModel::SixDof, s.motion.omega * 0.97, s.motion.t, false);
        let cfg = LmConfig::truncated(2.0 / s.focal);
        let r = refine_6dof(&s.correspondences, &s.rig, &init, &cfg).unwrap();
        assert!((r.motion.omega - s.motion.omega).norm() < 1e-6 * s.motion.omega.norm().max(1.0));
    }

    #[test]
    fn one_knot_is_the_single_motion_refiner() {
        let s = scene(MotionKind::General, 0.5, 8);
        let init = MotionEstimate::new(MotionModel::SixDof, s.motion.omega * 0.9, s.motion.t, false);
        let a = refine_6dof(&s.correspondences, &s.rig, &init, &LmConfig::default()).unwrap();
        let b = refine_multiknot(&s.correspondences, &s.rig, &init, 1, &LmConfig::default()).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.motion.omega, b.motion.knots[0].1);
        let s = scene(MotionKind::Rotation, 0.5, 9);
        let init = MotionEstimate::rotation(s.motion.omega * 0.9);
        let a = refine_rotation(&s.correspondences, &s.rig, &init, &LmConfig::default()).unwrap();
        let b = refine_multiknot(&s.correspondences, &s.rig, &init, 1, &LmConfig::default()).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.motion.omega, b.motion.knots[0].1);
    }

    #[test]
    fn identical_knots_have_the_single_motion_cost() {
        let s = scene(MotionKind::General, 0.5, 10);
        let (lo, hi) = observed_row_range(&s.correspondences);
        let k = KnotMotion::uniform(&s.motion, 3, lo, hi).unwrap();
        assert_eq!(
            knot_cost(&s.correspondences, &s.rig, &k, MotionModel::SixDof, None),
            motion_cost(&s.correspondences, &s.rig, &s.motion.with_model(MotionModel::SixDof), None)
        );
    }

    #[test]
    fn constant_motion_knots_agree() {
        let s = scene(MotionKind::General, 0.0, 11);
        let init = MotionEstimate::new(MotionModel::SixDof, s.motion.omega * 0.95, s.motion.t, false);
        let r = refine_multiknot(&s.correspondences, &s.rig, &init, 3, &LmConfig::default()).unwrap();
        let g = gauge_normalize(&s.motion.t);
        for (_, w, t) in &r.motion.knots {
            assert!((w - s.motion.omega).norm() < 1e-6, "{w} vs {}", s.motion.omega);
            assert!((t - g).norm() < 1e-6, "{t} vs {g}");
        }
    }

    #[test]
    fn ramped_rotation_prefers_knots() {
        let s = generate_scene(
            &SceneConfig {
                kind: MotionKind::Rotation,
                sigma_px: 0.0,
                omega_ramp: 0.5,
                ..SceneConfig::default()
            },
            12,
        )
        .unwrap();
        let single = refine_rotation(&s.correspondences, &s.rig, &s.motion, &LmConfig::default()).unwrap();
        let multi = refine_multiknot(&s.correspondences, &s.rig, &s.motion, 3, &LmConfig::default()).unwrap();
        assert!(multi.report.cost < single.report.cost, "{} vs {}", multi.report.cost, single.report.cost);
    }
}
