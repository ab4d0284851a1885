use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;

use shutterpair::bench::{self, BenchConfig, Method, Variant};
use shutterpair::io;
use shutterpair::rectify::{
    build_depth_maps, build_occlusion_masks, filter_flow, fuse_depths, fuse_warped, render_gs_translation,
    warp_image_rotation, Camera, FlowFilterConfig, Raster, WarpDirection,
};
use shutterpair::robust::{self, RansacConfig, Scoring};
use shutterpair::synth::render::{PlaneScene, Texture};
use shutterpair::synth::{generate_scene, scene_from_points, GenerationMode, MotionKind, SceneConfig};
use shutterpair::{Error, Intrinsics, MotionEstimate, MotionModel, Result, RigConfig};

/// Motion recovery and global-shutter synthesis for a pair of
/// rolling-shutter cameras with opposite readout directions.
#[derive(Parser)]
#[command(name = "shutterpair", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: correspondences, ground truth and optional renders.
    Synth(SynthArgs),
    /// Estimate the rig motion from a correspondence file.
    Solve(SolveArgs),
    /// Undistort an image pair into camera 1's global-shutter frame.
    Rectify(RectifyArgs),
    /// Run the synthetic velocity or baseline sweep and write a CSV.
    Benchmark(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Static,
    Tx,
    Txy,
    Txyz,
    Rot,
    General,
}

impl Kind {
    fn motion_kind(self) -> MotionKind {
        match self {
            Kind::Static => MotionKind::Static,
            Kind::Tx => MotionKind::Tx,
            Kind::Txy => MotionKind::Txy,
            Kind::Txyz => MotionKind::Txyz,
            Kind::Rot => MotionKind::Rotation,
            Kind::General => MotionKind::General,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Generation {
    Exact,
    FirstOrder,
    Factored,
}

impl Generation {
    fn mode(self) -> GenerationMode {
        match self {
            Generation::Exact => GenerationMode::Exact,
            Generation::FirstOrder => GenerationMode::FirstOrder,
            Generation::Factored => GenerationMode::Factored,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Tx,
    Txy,
    Txyz,
    Rot,
    #[value(name = "6dof")]
    SixDof,
    #[value(name = "6dof-baseline")]
    SixDofBaseline,
}

impl Solver {
    fn model(self) -> MotionModel {
        match self {
            Solver::Tx => MotionModel::Tx,
            Solver::Txy => MotionModel::Txy,
            Solver::Txyz => MotionModel::Txyz,
            Solver::Rot => MotionModel::Rot,
            Solver::SixDof => MotionModel::SixDof,
            Solver::SixDofBaseline => MotionModel::SixDofBaseline,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    V1,
    V2,
    V3,
}

impl VariantArg {
    fn variant(self) -> Variant {
        match self {
            VariantArg::V1 => Variant::V1,
            VariantArg::V2 => Variant::V2,
            VariantArg::V3 => Variant::V3,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Rotation,
    Translation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sweep {
    Velocity,
    Baseline,
}

fn parse_vec3(s: &str) -> std::result::Result<Vector3<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Vector3::new(*x, *y, *z)),
        _ => Err("expected three comma-separated finite numbers".into()),
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method {s:?} (expected interp or <solver>-<variant>)"))
}

#[derive(clap::Args)]
struct SynthArgs {
    /// Which velocity components the scene excites.
    #[arg(long, value_enum, default_value_t = Kind::General)]
    motion: Kind,
    /// Angular speed in degrees per frame.
    #[arg(long, default_value_t = 15.0)]
    omega_deg: f64,
    /// Translation per frame as a fraction of the nearest depth [default: 0.1 * omega-deg / 30].
    #[arg(long)]
    trans_frac: Option<f64>,
    /// Gaussian noise on every coordinate, in pixels.
    #[arg(long, default_value_t = 0.5)]
    sigma_px: f64,
    #[arg(long, default_value_t = 0.0)]
    outlier_fraction: f64,
    /// Baseline along x as a fraction of the nearest depth.
    #[arg(long, default_value_t = 0.0)]
    baseline_ratio: f64,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 1536)]
    width: usize,
    #[arg(long, default_value_t = 1024)]
    height: usize,
    #[arg(long, default_value_t = 1000.0)]
    focal: f64,
    #[arg(long, default_value_t = 5.0)]
    depth_min: f64,
    #[arg(long, default_value_t = 50.0)]
    depth_max: f64,
    /// Projection model used to generate observations.
    #[arg(long, value_enum, default_value_t = Generation::Exact)]
    generation: Generation,
    /// Relative change of the angular speed from the centre row to the frame ends.
    #[arg(long, default_value_t = 0.0)]
    omega_ramp: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV of scene points `x,y,z` in camera 1's frame, used instead of
    /// random points (--points and the depth range are then ignored).
    #[arg(long)]
    points_file: Option<PathBuf>,
    /// Also render a textured plane: RS image pair, GS reference and exact flows.
    #[arg(long)]
    render: bool,
    /// Render resolution relative to --width/--height (the focal scales along).
    #[arg(long, default_value_t = 0.25)]
    render_scale: f64,
    /// Depth of the rendered fronto-parallel plane [default: --depth-min].
    #[arg(long)]
    plane_depth: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "synth_out")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Correspondence CSV (u1,v1,u2,v2 in normalized coordinates).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Solver::SixDof)]
    solver: Solver,
    /// v1: per-correspondence fits; v2: global LO-RANSAC; v3: sample with the solver, refine full 6-DOF.
    #[arg(long, value_enum, default_value_t = VariantArg::V2)]
    variant: VariantArg,
    /// RANSAC iterations.
    #[arg(long, default_value_t = 200)]
    iters: usize,
    /// Inlier threshold in pixels at --focal.
    #[arg(long, default_value_t = 2.0)]
    threshold_px: f64,
    #[arg(long, default_value_t = 1000.0)]
    focal: f64,
    /// Local-optimization rounds per improvement.
    #[arg(long, default_value_t = 5)]
    lo_rounds: usize,
    /// Rig baseline `x,y,z` in scene units, in camera 1's frame.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0")]
    baseline: Vector3<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (motion.txt, inliers.txt).
    #[arg(long, default_value = "solve_out")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct RectifyArgs {
    #[arg(long, value_enum, default_value_t = Mode::Rotation)]
    mode: Mode,
    /// Motion file from `solve` or `synth`.
    #[arg(long)]
    motion: PathBuf,
    /// Camera 1 image (binary PGM/PPM).
    #[arg(long)]
    image1: PathBuf,
    /// Camera 2 image, raw (not flipped).
    #[arg(long)]
    image2: PathBuf,
    /// Flow from image 1 to the flipped image 2 (translation mode).
    #[arg(long)]
    flow12: Option<PathBuf>,
    /// Flow from the flipped image 2 to image 1 (translation mode).
    #[arg(long)]
    flow21: Option<PathBuf>,
    /// Focal length of the images in pixels; the principal point is the image centre.
    #[arg(long, default_value_t = 1000.0)]
    focal: f64,
    /// Rig baseline `x,y,z` in scene units.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0")]
    baseline: Vector3<f64>,
    /// Forward-backward flow consistency threshold in pixels.
    #[arg(long, default_value_t = 1.0)]
    flow_consistency_px: f64,
    /// Seed; rectification draws no random numbers and the value is only echoed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "rectify_out")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Sweep::Velocity)]
    sweep: Sweep,
    /// Angular speeds in degrees per frame [default: 0,5,...,30 (velocity); 15 (baseline)].
    #[arg(long, value_delimiter = ',')]
    omega_deg: Option<Vec<f64>>,
    /// Baseline-to-nearest-depth ratios [default: 0 (velocity); 0,0.01,...,0.05 (baseline)].
    #[arg(long, value_delimiter = ',')]
    baseline_ratios: Option<Vec<f64>>,
    /// Methods as `interp` or `<solver>-<variant>` [default: depends on the sweep].
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Option<Vec<Method>>,
    #[arg(long, default_value_t = 20)]
    scenes_per_point: usize,
    /// Translation fraction at --omega-max-deg; it scales linearly with the angular speed.
    #[arg(long, default_value_t = 0.1)]
    trans_frac_max: f64,
    #[arg(long, default_value_t = 30.0)]
    omega_max_deg: f64,
    #[arg(long, value_enum, default_value_t = Kind::General)]
    motion: Kind,
    #[arg(long, default_value_t = 0.5)]
    sigma_px: f64,
    #[arg(long, default_value_t = bench::DEFAULT_OUTLIER_FRACTION)]
    outlier_fraction: f64,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 1536)]
    width: usize,
    #[arg(long, default_value_t = 1024)]
    height: usize,
    #[arg(long, default_value_t = 1000.0)]
    focal: f64,
    #[arg(long, default_value_t = 5.0)]
    depth_min: f64,
    #[arg(long, default_value_t = 50.0)]
    depth_max: f64,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 2.0)]
    threshold_px: f64,
    #[arg(long, default_value_t = 5)]
    lo_rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record wall-clock time per fit (makes runtime_us non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Print the per-method medians to stdout.
    #[arg(long)]
    summary: bool,
    /// Output CSV.
    #[arg(long, default_value = "benchmark.csv")]
    out: PathBuf,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn fmt_vec(v: &Vector3<f64>) -> String {
    format!("{},{},{}", v.x, v.y, v.z)
}

fn image_name(stem: &str, img: &Raster) -> String {
    format!("{stem}.{}", if img.channels == 1 { "pgm" } else { "ppm" })
}

fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = SceneConfig {
        kind: a.motion.motion_kind(),
        omega_deg: a.omega_deg,
        trans_frac: a.trans_frac.unwrap_or(0.1 * a.omega_deg / 30.0),
        sigma_px: a.sigma_px,
        outlier_fraction: a.outlier_fraction,
        baseline_ratio: a.baseline_ratio,
        num_points: a.points,
        width: a.width,
        height: a.height,
        focal: a.focal,
        depth_min: a.depth_min,
        depth_max: a.depth_max,
        mode: a.generation.mode(),
        omega_ramp: a.omega_ramp,
    };
    let scene = match &a.points_file {
        Some(p) => scene_from_points(&cfg, &io::read_points(p)?, a.seed)?,
        None => generate_scene(&cfg, a.seed)?,
    };
    ensure_dir(&a.out)?;
    let gs_pairs: Vec<_> = scene
        .points
        .iter()
        .map(|x| shutterpair::synth::project_gs(x, &scene.rig).map(|(p, q)| shutterpair::Correspondence::new(p, q)))
        .collect::<Result<_>>()?;
    io::write_correspondences(&a.out.join("correspondences.csv"), &scene.correspondences)?;
    io::write_correspondences(&a.out.join("gs_truth.csv"), &gs_pairs)?;
    io::write_mask(&a.out.join("outliers.txt"), &scene.is_outlier)?;
    let mut meta = vec![
        format!("motion={}", cfg.kind.name()),
        format!("omega_deg={}", cfg.omega_deg),
        format!("trans_frac={}", cfg.trans_frac),
        format!("sigma_px={}", cfg.sigma_px),
        format!("outlier_fraction={}", cfg.outlier_fraction),
        format!("baseline_ratio={}", cfg.baseline_ratio),
        format!("baseline={}", fmt_vec(&scene.rig.baseline)),
        format!("points={}", scene.points.len()),
        format!("width={}", cfg.width),
        format!("height={}", cfg.height),
        format!("focal={}", cfg.focal),
        format!("depth_min={}", cfg.depth_min),
        format!("depth_max={}", cfg.depth_max),
        format!("generation={}", cfg.mode.name()),
        format!("omega_ramp={}", cfg.omega_ramp),
        format!("seed={}", a.seed),
    ];
    if let Some(p) = &a.points_file {
        meta.push(format!("points_file={}", p.display()));
    }
    if a.render {
        if !(a.render_scale > 0.0) {
            return Err(Error::InvalidArgument("render scale must be positive".into()));
        }
        let w = ((a.width as f64 * a.render_scale).round() as usize).max(1);
        let h = ((a.height as f64 * a.render_scale).round() as usize).max(1);
        let intr = Intrinsics::centered(a.focal * a.render_scale, w, h);
        let depth = a.plane_depth.unwrap_or(a.depth_min);
        if !(depth > 0.0) {
            return Err(Error::InvalidArgument("plane depth must be positive".into()));
        }
        let plane = PlaneScene::fronto_parallel(depth, Texture::random(a.seed, 3, intr.focal, 8.0));
        let rs1 = plane.render_rs(&scene.motion, &scene.rig, &intr, Camera::First, w, h)?;
        let rs2 = plane.render_rs(&scene.motion, &scene.rig, &intr, Camera::Second, w, h)?;
        let gs = plane.render_gs(&intr, w, h)?;
        let (f12, f21) = plane.flows(&scene.motion, &scene.rig, &intr, w, h);
        io::write_image(&a.out.join("rs1.ppm"), &rs1)?;
        io::write_image(&a.out.join("rs2.ppm"), &rs2)?;
        io::write_image(&a.out.join("gs.ppm"), &gs)?;
        io::write_flow(&a.out.join("flow12.flo"), &f12)?;
        io::write_flow(&a.out.join("flow21.flo"), &f21)?;
        meta.push(format!("render_width={w}"));
        meta.push(format!("render_height={h}"));
        meta.push(format!("render_focal={}", intr.focal));
        meta.push(format!("plane_depth={depth}"));
    }
    io::write_motion(&a.out.join("motion_gt.txt"), &scene.motion, &meta)?;
    println!(
        "wrote {} correspondences ({} outliers) to {}",
        scene.correspondences.len(),
        scene.is_outlier.iter().filter(|o| **o).count(),
        a.out.display()
    );
    Ok(())
}

/// Component-wise median of the per-correspondence estimates of v1.
fn median_motion(model: MotionModel, estimates: &[MotionEstimate]) -> MotionEstimate {
    let med = |f: &dyn Fn(&MotionEstimate) -> f64| {
        let mut v: Vec<f64> = estimates.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        bench::quantile(&v, 0.5)
    };
    let omega = Vector3::new(med(&|e| e.omega.x), med(&|e| e.omega.y), med(&|e| e.omega.z));
    let t = Vector3::new(med(&|e| e.t.x), med(&|e| e.t.y), med(&|e| e.t.z));
    MotionEstimate::new(model, omega, t, estimates[0].scale_known)
}

fn solve(a: &SolveArgs) -> Result<()> {
    if !(a.focal > 0.0) {
        return Err(Error::InvalidArgument("focal must be positive".into()));
    }
    let corrs = io::read_correspondences(&a.input)?;
    let rig = RigConfig::mirrored().with_baseline(a.baseline);
    let model = a.solver.model();
    let variant = a.variant.variant();
    let cfg = RansacConfig {
        iterations: a.iters,
        inlier_threshold: a.threshold_px / a.focal,
        local_opt_rounds: a.lo_rounds,
        seed: a.seed,
        scoring: None,
    };
    cfg.validate()?;
    let start = Instant::now();
    let (motion, mask) = match variant {
        Variant::V1 => {
            let fit = robust::fit_local_v1(&corrs, &rig, model, a.seed)?;
            let ok: Vec<MotionEstimate> = fit.estimates.iter().flatten().copied().collect();
            if ok.is_empty() {
                return Err(Error::NoModelFound);
            }
            (median_motion(model, &ok), fit.estimates.iter().map(|e| e.is_some()).collect::<Vec<_>>())
        }
        Variant::V2 => {
            let est = robust::fit_global_v2(&corrs, &rig, model, &cfg)?;
            (est.motion, est.inlier_mask)
        }
        Variant::V3 => {
            let est = robust::fit_hybrid_v3(&corrs, &rig, model, &cfg)?;
            (est.motion, est.inlier_mask)
        }
    };
    let elapsed = start.elapsed();
    let mrig = robust::model_rig(motion.model, &rig);
    let scoring = Scoring::for_model(motion.model);
    let mut res: Vec<f64> = corrs
        .iter()
        .zip(&mask)
        .filter(|(_, m)| **m)
        .map(|(c, _)| robust::residual(scoring, c, &motion, &mrig) * a.focal)
        .collect();
    res.sort_by(f64::total_cmp);
    let inliers = mask.iter().filter(|m| **m).count();

    ensure_dir(&a.out)?;
    let meta = vec![
        format!("input={}", a.input.display()),
        format!("solver={}", bench::solver_name(model)),
        format!("variant={}", variant.name()),
        format!("iters={}", a.iters),
        format!("threshold_px={}", a.threshold_px),
        format!("focal={}", a.focal),
        format!("lo_rounds={}", a.lo_rounds),
        format!("baseline={}", fmt_vec(&a.baseline)),
        format!("seed={}", a.seed),
        format!("inliers={inliers}/{}", corrs.len()),
    ];
    io::write_motion(&a.out.join("motion.txt"), &motion, &meta)?;
    io::write_mask(&a.out.join("inliers.txt"), &mask)?;
    println!("solver {} {}", bench::solver_name(model), variant.name());
    println!("inliers {inliers}/{}", corrs.len());
    if res.is_empty() {
        println!("median_residual_px nan");
    } else {
        println!("median_residual_px {:.6}", bench::quantile(&res, 0.5));
    }
    println!("omega {:.6e} {:.6e} {:.6e}", motion.omega.x, motion.omega.y, motion.omega.z);
    println!("t {:.6e} {:.6e} {:.6e}", motion.t.x, motion.t.y, motion.t.z);
    // wall-clock time goes to stderr so stdout stays reproducible
    eprintln!("runtime_ms {:.3}", elapsed.as_secs_f64() * 1e3);
    Ok(())
}

fn rectify(a: &RectifyArgs) -> Result<()> {
    if !(a.focal > 0.0) {
        return Err(Error::InvalidArgument("focal must be positive".into()));
    }
    // check every input before doing any work
    let (f12_path, f21_path) = match a.mode {
        Mode::Rotation => (None, None),
        Mode::Translation => match (&a.flow12, &a.flow21) {
            (Some(p), Some(q)) => (Some(p), Some(q)),
            _ => return Err(Error::InvalidArgument("translation mode needs --flow12 and --flow21".into())),
        },
    };
    let motion = io::read_motion(&a.motion)?;
    let img1 = io::read_image(&a.image1)?;
    let img2 = io::read_image(&a.image2)?;
    if !img1.same_shape(&img2) {
        return Err(Error::DimensionMismatch(format!(
            "{}: {}x{}x{}, {}: {}x{}x{}",
            a.image1.display(),
            img1.width,
            img1.height,
            img1.channels,
            a.image2.display(),
            img2.width,
            img2.height,
            img2.channels
        )));
    }
    let flows = match (f12_path, f21_path) {
        (Some(p), Some(q)) => Some((io::read_flow(p)?, io::read_flow(q)?)),
        _ => None,
    };
    let rig = RigConfig::mirrored().with_baseline(a.baseline);
    let intr = Intrinsics::centered(a.focal, img1.width, img1.height);
    ensure_dir(&a.out)?;

    match flows {
        None => {
            let g1 = warp_image_rotation(&img1, &motion.omega, &rig, &intr, Camera::First, WarpDirection::Backward);
            let g2 = warp_image_rotation(&img2, &motion.omega, &rig, &intr, Camera::Second, WarpDirection::Backward);
            let fused = fuse_warped(&g1, &g2)?;
            io::write_image(&a.out.join(image_name("gs1", &g1)), &g1)?;
            io::write_image(&a.out.join(image_name("gs2", &g2)), &g2)?;
            io::write_image(&a.out.join(image_name("fused", &fused)), &fused)?;
            // PNM has no alpha; validity goes to separate masks
            for (name, img) in [("valid1.pgm", &g1), ("valid2.pgm", &g2), ("valid_fused.pgm", &fused)] {
                io::write_bool_image(&a.out.join(name), img.width, img.height, &img.valid)?;
            }
            println!(
                "rotation mode: valid pixels gs1 {} gs2 {} fused {} of {}",
                g1.coverage(),
                g2.coverage(),
                fused.coverage(),
                img1.width * img1.height
            );
        }
        Some((f12, f21)) => {
            if f12.width != img1.width || f12.height != img1.height {
                return Err(Error::DimensionMismatch(format!(
                    "flow {}x{} vs image {}x{}",
                    f12.width, f12.height, img1.width, img1.height
                )));
            }
            let fcfg = FlowFilterConfig {
                consistency_px: a.flow_consistency_px,
                ..FlowFilterConfig::default()
            };
            let g12 = filter_flow(&f12, &f21, &fcfg)?;
            let g21 = filter_flow(&f21, &f12, &fcfg)?;
            let (d1, d2) = build_depth_maps(&g12, &g21, &motion, &rig, &intr)?;
            let (m1, m2) = build_occlusion_masks(&d1, &d2)?;
            let fused_depth = fuse_depths(&d1, &d2)?;
            let out = render_gs_translation(&img1, &img2, &fused_depth, (&m1, &m2), &motion, &rig, &intr)?;
            let max_depth = fused_depth.depth.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            io::write_depth_image(&a.out.join("depth1.pgm"), &d1, max_depth)?;
            io::write_depth_image(&a.out.join("depth2.pgm"), &d2, max_depth)?;
            io::write_depth_image(&a.out.join("depth_fused.pgm"), &fused_depth, max_depth)?;
            io::write_mask_image(&a.out.join("occlusion1.pgm"), &m1)?;
            io::write_mask_image(&a.out.join("occlusion2.pgm"), &m2)?;
            let flags = Raster::from_data(
                img1.width,
                img1.height,
                1,
                out.flags.iter().map(|f| *f as u8 as f32 / 2.0).collect(),
            )?;
            io::write_image(&a.out.join("flags.pgm"), &flags)?;
            io::write_image(&a.out.join(image_name("gs", &out.image)), &out.image)?;
            io::write_bool_image(&a.out.join("valid.pgm"), img1.width, img1.height, &out.image.valid)?;
            println!(
                "translation mode: valid pixels depth1 {} depth2 {} fused {} rendered {} of {} (depth {max_depth} -> white)",
                d1.valid_count(),
                d2.valid_count(),
                fused_depth.valid_count(),
                out.image.coverage(),
                img1.width * img1.height
            );
        }
    }
    Ok(())
}

fn benchmark(a: &BenchArgs) -> Result<()> {
    let base = match a.sweep {
        Sweep::Velocity => BenchConfig::default(),
        Sweep::Baseline => BenchConfig::baseline_sweep(),
    };
    let scene = SceneConfig {
        kind: a.motion.motion_kind(),
        sigma_px: a.sigma_px,
        outlier_fraction: a.outlier_fraction,
        num_points: a.points,
        width: a.width,
        height: a.height,
        focal: a.focal,
        depth_min: a.depth_min,
        depth_max: a.depth_max,
        ..base.scene.clone()
    };
    let cfg = BenchConfig {
        scene,
        omega_deg: a.omega_deg.clone().unwrap_or(base.omega_deg),
        trans_frac_max: a.trans_frac_max,
        omega_max_deg: a.omega_max_deg,
        baseline_ratios: a.baseline_ratios.clone().unwrap_or(base.baseline_ratios),
        scenes_per_point: a.scenes_per_point,
        methods: a.methods.clone().unwrap_or(base.methods),
        ransac: RansacConfig {
            iterations: a.iters,
            inlier_threshold: a.threshold_px / a.focal,
            local_opt_rounds: a.lo_rounds,
            seed: a.seed,
            scoring: None,
        },
        seed: a.seed,
        timing: a.timing,
    };
    let records = bench::run_benchmark(&cfg)?;
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    let meta: Vec<(String, String)> = [
        ("sweep", if a.sweep == Sweep::Velocity { "velocity".to_string() } else { "baseline".to_string() }),
        ("omega_deg", list(&cfg.omega_deg)),
        ("baseline_ratios", list(&cfg.baseline_ratios)),
        ("methods", cfg.methods.iter().map(|m| m.label()).collect::<Vec<_>>().join(";")),
        ("scenes_per_point", cfg.scenes_per_point.to_string()),
        ("trans_frac_max", cfg.trans_frac_max.to_string()),
        ("omega_max_deg", cfg.omega_max_deg.to_string()),
        ("motion", cfg.scene.kind.name().to_string()),
        ("sigma_px", cfg.scene.sigma_px.to_string()),
        ("outlier_fraction", cfg.scene.outlier_fraction.to_string()),
        ("points", cfg.scene.num_points.to_string()),
        ("width", cfg.scene.width.to_string()),
        ("height", cfg.scene.height.to_string()),
        ("focal_px", cfg.scene.focal.to_string()),
        ("depth_min", cfg.scene.depth_min.to_string()),
        ("depth_max", cfg.scene.depth_max.to_string()),
        ("generation", cfg.scene.mode.name().to_string()),
        ("ransac_iterations", cfg.ransac.iterations.to_string()),
        ("threshold_px", a.threshold_px.to_string()),
        ("lo_rounds", cfg.ransac.local_opt_rounds.to_string()),
        ("seed", cfg.seed.to_string()),
        ("timing", cfg.timing.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    io::write_benchmark(&a.out, &records, &meta)?;
    if a.summary {
        println!("method,omega_deg,baseline_ratio,scenes,median_px,variance_px2,failures");
        for g in bench::aggregate(&records) {
            println!(
                "{},{},{},{},{:.4},{:.4},{}",
                g.method.label(),
                g.omega_deg,
                g.baseline_ratio,
                g.scenes,
                g.median_px,
                g.variance_px2,
                g.failures
            );
        }
    }
    eprintln!("wrote {} records to {}", records.len(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Solve(a) => solve(a),
        Command::Rectify(a) => rectify(a),
        Command::Benchmark(a) => benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
