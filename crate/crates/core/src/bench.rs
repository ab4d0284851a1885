//! Synthetic benchmark harness: velocity and baseline sweeps over the
//! solver/variant grid, one record per (scene, method).

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::MotionModel;
use crate::robust::{fit_global_v2, fit_hybrid_v3, fit_local_v1, model_rig, RansacConfig};
use crate::synth::{generate_scene, interpolation_error, undistortion_error, SceneConfig, SyntheticScene};

/// How the motion is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Per-correspondence minimal fits.
    V1,
    /// One global model with LO-RANSAC.
    V2,
    /// Minimal model for sampling, full 6-DOF for refinement.
    V3,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
            Variant::V3 => "v3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "v1" => Some(Variant::V1),
            "v2" => Some(Variant::V2),
            "v3" => Some(Variant::V3),
            _ => None,
        }
    }
}

/// Short command-line name of a solver.
pub fn solver_name(m: MotionModel) -> &'static str {
    match m {
        MotionModel::Tx => "tx",
        MotionModel::Txy => "txy",
        MotionModel::Txyz => "txyz",
        MotionModel::Rot => "rot",
        MotionModel::SixDof => "6dof",
        MotionModel::SixDofBaseline => "6dof-baseline",
    }
}

pub fn parse_solver(s: &str) -> Option<MotionModel> {
    MotionModel::ALL
        .iter()
        .copied()
        .find(|m| solver_name(*m) == s)
        .or_else(|| match s {
            "w" | "rotation" => Some(MotionModel::Rot),
            "wt" => Some(MotionModel::SixDof),
            "wtb" => Some(MotionModel::SixDofBaseline),
            _ => MotionModel::from_tag(s),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Midpoint of the two observations, no motion model.
    Interp,
    Fit { solver: MotionModel, variant: Variant },
}

impl Method {
    pub fn fit(solver: MotionModel, variant: Variant) -> Self {
        Method::Fit { solver, variant }
    }

    /// `interp` or `<solver>-<variant>`, e.g. `txy-v1`.
    pub fn label(&self) -> String {
        match self {
            Method::Interp => "interp".into(),
            Method::Fit { solver, variant } => format!("{}-{}", solver_name(*solver), variant.name()),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "interp" {
            return Some(Method::Interp);
        }
        let (solver, variant) = s.rsplit_once('-')?;
        Some(Method::fit(parse_solver(solver)?, Variant::parse(variant)?))
    }

    fn solver_tag(&self) -> &'static str {
        match self {
            Method::Interp => "INTERP",
            Method::Fit { solver, .. } => solver.tag(),
        }
    }

    fn variant_name(&self) -> &'static str {
        match self {
            Method::Interp => "-",
            Method::Fit { variant, .. } => variant.name(),
        }
    }
}

/// The methods of the velocity sweep: the four zero-baseline models under
/// v1 and v2, v3 from txy, and the interpolation baseline.
pub fn default_methods() -> Vec<Method> {
    let mut out = vec![Method::Interp];
    for v in [Variant::V1, Variant::V2] {
        for s in [MotionModel::SixDof, MotionModel::Rot, MotionModel::Txyz, MotionModel::Txy] {
            out.push(Method::fit(s, v));
        }
    }
    out.push(Method::fit(MotionModel::Txy, Variant::V3));
    out
}

/// Fraction of uniform outliers in benchmark scenes.
pub const DEFAULT_OUTLIER_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Template for every scene; the sweep overrides speed and baseline.
    pub scene: SceneConfig,
    pub omega_deg: Vec<f64>,
    /// Translational speed at `omega_max_deg`; it scales linearly with ω.
    pub trans_frac_max: f64,
    pub omega_max_deg: f64,
    pub baseline_ratios: Vec<f64>,
    pub scenes_per_point: usize,
    pub methods: Vec<Method>,
    pub ransac: RansacConfig,
    pub seed: u64,
    /// Record wall-clock time per fit; off keeps output bit-reproducible.
    pub timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig {
                outlier_fraction: DEFAULT_OUTLIER_FRACTION,
                ..SceneConfig::default()
            },
            omega_deg: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            trans_frac_max: 0.1,
            omega_max_deg: 30.0,
            baseline_ratios: vec![0.0],
            scenes_per_point: 20,
            methods: default_methods(),
            ransac: RansacConfig::default(),
            seed: 0,
            timing: false,
        }
    }
}

impl BenchConfig {
    /// Baseline sweep: fixed speed, baseline from 0 to 5% of the
    /// closest depth, v2 fits of the zero-baseline models and the baseline solver.
    pub fn baseline_sweep() -> Self {
        let mut methods = vec![Method::Interp];
        for s in [
            MotionModel::SixDof,
            MotionModel::Rot,
            MotionModel::Txyz,
            MotionModel::Txy,
            MotionModel::SixDofBaseline,
        ] {
            methods.push(Method::fit(s, Variant::V2));
        }
        Self {
            omega_deg: vec![15.0],
            baseline_ratios: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            methods,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ransac.validate()?;
        if self.omega_deg.is_empty() || self.baseline_ratios.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidArgument("empty sweep".into()));
        }
        if self.scenes_per_point == 0 {
            return Err(Error::InvalidArgument("scenes per point must be at least 1".into()));
        }
        if !(self.omega_max_deg > 0.0) {
            return Err(Error::InvalidArgument("omega_max_deg must be positive".into()));
        }
        Ok(())
    }

    pub fn trans_frac(&self, omega_deg: f64) -> f64 {
        self.trans_frac_max * omega_deg / self.omega_max_deg
    }

    /// Total number of scenes in the sweep.
    pub fn scene_count(&self) -> usize {
        self.omega_deg.len() * self.baseline_ratios.len() * self.scenes_per_point
    }
}

/// One CSV row: a method on a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub method: Method,
    pub omega_deg: f64,
    pub trans_frac: f64,
    pub sigma_px: f64,
    pub baseline_ratio: f64,
    pub seed: u64,
    pub median_px: f64,
    pub mean_px: f64,
    pub p90_px: f64,
    /// Variance of the per-correspondence errors, px².
    pub variance_px2: f64,
    pub runtime_us: f64,
    pub inliers: usize,
    pub points: usize,
    pub focal_px: f64,
    /// The fit failed and the raw observations were scored instead.
    pub failed: bool,
}

impl BenchmarkRecord {
    pub const HEADER: &'static str = "solver,variant,omega_deg,trans_frac,sigma_px,baseline_ratio,seed,median_px,mean_px,p90_px,variance_px2,runtime_us,inliers,points,focal_px,failed";

    pub fn label(&self) -> String {
        self.method.label()
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method.solver_tag(),
            self.method.variant_name(),
            self.omega_deg,
            self.trans_frac,
            self.sigma_px,
            self.baseline_ratio,
            self.seed,
            self.median_px,
            self.mean_px,
            self.p90_px,
            self.variance_px2,
            self.runtime_us,
            self.inliers,
            self.points,
            self.focal_px,
            self.failed as u8
        )
    }

    pub fn from_csv(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 16 {
            return None;
        }
        let method = if f[0] == "INTERP" {
            Method::Interp
        } else {
            Method::fit(MotionModel::from_tag(f[0])?, Variant::parse(f[1])?)
        };
        let num = |i: usize| f[i].parse::<f64>().ok();
        Some(Self {
            method,
            omega_deg: num(2)?,
            trans_frac: num(3)?,
            sigma_px: num(4)?,
            baseline_ratio: num(5)?,
            seed: f[6].parse().ok()?,
            median_px: num(7)?,
            mean_px: num(8)?,
            p90_px: num(9)?,
            variance_px2: num(10)?,
            runtime_us: num(11)?,
            inliers: f[12].parse().ok()?,
            points: f[13].parse().ok()?,
            focal_px: num(14)?,
            failed: match f[15] {
                "0" => false,
                "1" => true,
                _ => return None,
            },
        })
    }
}

/// Summary statistics of a non-empty sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub median: f64,
    pub mean: f64,
    pub p90: f64,
    pub variance: f64,
}

pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn stats(values: &[f64]) -> Stats {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let variance = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Stats {
        median: quantile(&v, 0.5),
        mean,
        p90: quantile(&v, 0.9),
        variance,
    }
}

/// Seed of scene `index` at sweep point `point`.
pub fn scene_seed(base: u64, point: usize, index: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((point as u64) << 24)
        .wrapping_add(index as u64)
}

/// Per-correspondence undistortion errors (px) of `method` on the inliers of
/// `scene`, plus the inlier count of the fit (0 for methods without one).
pub fn evaluate(scene: &SyntheticScene, method: Method, ransac: &RansacConfig) -> (Vec<f64>, usize, bool) {
    let corrs = &scene.correspondences;
    let keep: Vec<usize> = (0..corrs.len()).filter(|i| !scene.is_outlier[*i]).collect();
    let raw = |keep: &[usize]| -> Vec<f64> {
        keep.iter().map(|&i| corrs[i].first.distance(&scene.gs[i]) * scene.focal).collect()
    };
    let cfg = RansacConfig {
        seed: ransac.seed ^ scene.seed,
        ..*ransac
    };
    match method {
        Method::Interp => (
            keep.iter()
                .map(|&i| interpolation_error(&corrs[i], &scene.gs[i], &scene.rig, scene.focal))
                .collect(),
            0,
            false,
        ),
        Method::Fit { solver, variant: Variant::V1 } => match fit_local_v1(corrs, &scene.rig, solver, cfg.seed) {
            Ok(fit) => (
                keep.iter().map(|&i| fit.points[i].distance(&scene.gs[i]) * scene.focal).collect(),
                fit.estimates.iter().filter(|e| e.is_some()).count(),
                false,
            ),
            Err(_) => (raw(&keep), 0, true),
        },
        Method::Fit { solver, variant } => {
            let fit = if variant == Variant::V2 {
                fit_global_v2(corrs, &scene.rig, solver, &cfg)
            } else {
                fit_hybrid_v3(corrs, &scene.rig, solver, &cfg)
            };
            match fit {
                Ok(est) => {
                    let rig = model_rig(est.motion.model, &scene.rig);
                    (
                        keep.iter()
                            .map(|&i| undistortion_error(&corrs[i], &est.motion, &scene.gs[i], &rig, scene.focal))
                            .collect(),
                        est.inlier_count(),
                        false,
                    )
                }
                Err(_) => (raw(&keep), 0, true),
            }
        }
    }
}

fn run_scene(cfg: &BenchConfig, omega: f64, baseline: f64, seed: u64) -> Result<Vec<BenchmarkRecord>> {
    let scene_cfg = SceneConfig {
        omega_deg: omega,
        trans_frac: cfg.trans_frac(omega),
        baseline_ratio: baseline,
        ..cfg.scene.clone()
    };
    let scene = generate_scene(&scene_cfg, seed)?;
    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let start = Instant::now();
        let (errors, inliers, failed) = evaluate(&scene, method, &cfg.ransac);
        let runtime_us = if cfg.timing { start.elapsed().as_secs_f64() * 1e6 } else { 0.0 };
        let s = stats(&errors);
        out.push(BenchmarkRecord {
            method,
            omega_deg: omega,
            trans_frac: scene_cfg.trans_frac,
            sigma_px: scene_cfg.sigma_px,
            baseline_ratio: baseline,
            seed,
            median_px: s.median,
            mean_px: s.mean,
            p90_px: s.p90,
            variance_px2: s.variance,
            runtime_us,
            inliers,
            points: errors.len(),
            focal_px: scene.focal,
            failed,
        });
    }
    Ok(out)
}

/// Runs the sweep. Scenes are processed in parallel; the output order
/// (ω, baseline, scene, method) and every value are independent of scheduling.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchmarkRecord>> {
    cfg.validate()?;
    let mut jobs = Vec::with_capacity(cfg.scene_count());
    let mut point = 0;
    for &omega in &cfg.omega_deg {
        for &baseline in &cfg.baseline_ratios {
            for i in 0..cfg.scenes_per_point {
                jobs.push((omega, baseline, scene_seed(cfg.seed, point, i)));
            }
            point += 1;
        }
    }
    let rows: Vec<Result<Vec<BenchmarkRecord>>> =
        jobs.par_iter().map(|&(w, b, s)| run_scene(cfg, w, b, s)).collect();
    let mut out = Vec::with_capacity(jobs.len() * cfg.methods.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Median over scenes of a per-scene statistic, per method and sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub omega_deg: f64,
    pub baseline_ratio: f64,
    pub scenes: usize,
    pub median_px: f64,
    pub variance_px2: f64,
    pub failures: usize,
}

pub fn aggregate(records: &[BenchmarkRecord]) -> Vec<Aggregate> {
    let mut keys: Vec<(Method, f64, f64)> = Vec::new();
    for r in records {
        let k = (r.method, r.omega_deg, r.baseline_ratio);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, omega_deg, baseline_ratio)| {
            let sel: Vec<&BenchmarkRecord> = records
                .iter()
                .filter(|r| r.method == method && r.omega_deg == omega_deg && r.baseline_ratio == baseline_ratio)
                .collect();
            let med: Vec<f64> = sel.iter().map(|r| r.median_px).collect();
            let var: Vec<f64> = sel.iter().map(|r| r.variance_px2).collect();
            Aggregate {
                method,
                omega_deg,
                baseline_ratio,
                scenes: sel.len(),
                median_px: stats(&med).median,
                variance_px2: stats(&var).median,
                failures: sel.iter().filter(|r| r.failed).count(),
            }
        })
        .collect()
}

pub fn find<'a>(agg: &'a [Aggregate], method: Method, omega_deg: f64, baseline_ratio: f64) -> Option<&'a Aggregate> {
    agg.iter()
        .find(|a| a.method == method && a.omega_deg == omega_deg && a.baseline_ratio == baseline_ratio)
}
