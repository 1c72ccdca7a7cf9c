//! Command-line front end: `landmarks`, `reconstruct`, `evaluate`, `synth`
//! and `config`.
//!
//! Data goes to files; standard output carries one `key=value` summary line
//! per stage and diagnostics go to standard error.

mod files;

pub use files::{assign_levels, load_landmark_dir, load_mesh_dir};

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::anatomy::{analyze_spine, LandmarkSet};
use crate::config::PipelineConfig;
use crate::evaluation::{evaluate_reconstruction, reports_to_csv, RegistrationReport};
use crate::facet::{align_facets, JointReport};
use crate::level::Level;
use crate::mesh::MeshFormat;
use crate::registration::{register_spine, RegistrationMode};
use crate::spine::{vertebral_body, SpineModel};
use crate::synthetic::{generate_spine, make_registration_case, Perturbation, SpineParams};
use crate::transform::{Transform4, TransformRecord};
use files::{create_dir, load_meshes, write_json, write_landmarks, write_mesh};

#[derive(Parser, Debug)]
#[command(
    name = "spinerecon",
    version,
    about = "Reconstruct complete lumbar vertebrae from vertebral-body meshes"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// JSON configuration file (see `config --dump`).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override a configuration value, e.g. `--set anatomy.cos_threshold=0.7`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for ICP sampling and synthetic generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Registration mode: ours, ours-icp, icp or icp-vb.
    #[arg(long, global = true)]
    pub mode: Option<RegistrationMode>,

    /// Skip facet-joint alignment.
    #[arg(long, global = true)]
    pub no_facets: bool,

    /// Output mesh format: ply, stl or obj.
    #[arg(long, global = true, value_parser = parse_format)]
    pub format: Option<MeshFormat>,

    /// More diagnostics on standard error (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn parse_format(s: &str) -> Result<MeshFormat, String> {
    MeshFormat::parse(s).ok_or_else(|| format!("unknown mesh format {s:?}; expected ply, stl or obj"))
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Detect the eight endplate landmarks on vertebral-body meshes.
    Landmarks(LandmarksArgs),
    /// Register atlas vertebrae onto target vertebral bodies.
    Reconstruct(ReconstructArgs),
    /// Compare a reconstruction with ground truth.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic spine, optionally with a registration case.
    Synth(SynthArgs),
    /// Show the effective configuration.
    Config(ConfigArgs),
}

#[derive(Args, Debug)]
pub struct LandmarksArgs {
    /// Vertebral-body meshes; levels are read from the file names.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,

    /// Explicit levels, one per input, e.g. `--levels L3,L4`.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<Level>>,

    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// Directory of complete, labeled atlas vertebrae.
    #[arg(long)]
    pub atlas: PathBuf,

    /// Directory of target vertebral-body meshes.
    #[arg(long)]
    pub targets: PathBuf,

    #[arg(short, long)]
    pub out: PathBuf,

    /// Also write the registration time to this JSON file.
    #[arg(long)]
    pub timing_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Output directory of `reconstruct`.
    #[arg(long)]
    pub registered: PathBuf,

    /// Directory of complete ground-truth vertebrae.
    #[arg(long)]
    pub ground_truth: PathBuf,

    /// Directory of ground-truth landmark files.
    #[arg(long)]
    pub gt_landmarks: Option<PathBuf>,

    /// Timing file written by `reconstruct --timing-file`.
    #[arg(long)]
    pub timing: Option<PathBuf>,

    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Spine parameter file (JSON); defaults are used when absent.
    #[arg(long)]
    pub params: Option<PathBuf>,

    #[arg(short, long)]
    pub out: PathBuf,

    /// Also write a registration case built from the spine.
    #[arg(long)]
    pub case: bool,

    /// Perturbation of the registration case (JSON).
    #[arg(long, requires = "case")]
    pub perturbation: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConfigArgs {
    /// Print the effective configuration as JSON.
    #[arg(long)]
    pub dump: bool,
}

/// Effective configuration: defaults, then the config file, then `--set`
/// overrides, then dedicated flags. Validated before returning.
pub fn resolve_config(global: &GlobalArgs) -> Result<PipelineConfig> {
    let mut config = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for o in &global.overrides {
        config.apply_override(o)?;
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(mode) = global.mode {
        config.registration.mode = mode;
    }
    if global.no_facets {
        config.facet.enabled = false;
    }
    if let Some(format) = global.format {
        config.output.format = format;
    }
    config.validate()?;
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = resolve_config(&cli.global)?;
    match &cli.command {
        Command::Landmarks(a) => cmd_landmarks(a, &config),
        Command::Reconstruct(a) => cmd_reconstruct(a, &config),
        Command::Evaluate(a) => cmd_evaluate(a, &config),
        Command::Synth(a) => cmd_synth(a, &config),
        Command::Config(a) => {
            if a.dump {
                println!("{}", config.to_json_pretty());
            } else {
                println!("stage=config valid=true");
            }
            Ok(())
        }
    }
}

/// Landmarks of every vertebral body in `spine`, with level context on
/// failure.
pub fn detect_spine_landmarks(spine: &SpineModel, config: &PipelineConfig) -> Result<Vec<(Level, LandmarkSet)>> {
    if spine.len() == 1 {
        log::warn!("single vertebra: no spine curve, axes come from the bounding box alone (reduced accuracy)");
    }
    let bodies: Vec<_> = spine.vertebrae().iter().map(|v| vertebral_body(&v.mesh)).collect();
    let refs: Vec<_> = bodies.iter().collect();
    let results = analyze_spine(&refs, &config.axes.to_axes()?, &config.anatomy)?;
    results
        .into_iter()
        .zip(spine.levels())
        .map(|(r, level)| {
            r.map(|a| (level, a.landmarks))
                .with_context(|| format!("{level}: landmark detection failed"))
        })
        .collect()
}

fn cmd_landmarks(args: &LandmarksArgs, config: &PipelineConfig) -> Result<()> {
    let assigned = assign_levels(&args.inputs, args.levels.as_deref())?;
    let spine = load_meshes(&assigned)?;
    let sets = detect_spine_landmarks(&spine, config)?;
    create_dir(&args.out)?;
    for (level, set) in &sets {
        write_landmarks(&args.out, *level, set)?;
    }
    println!("stage=landmarks levels={} out={}", sets.len(), args.out.display());
    Ok(())
}

/// Registration followed by optional facet alignment.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub spine: SpineModel,
    pub transforms: Vec<(Level, Transform4)>,
    pub joints: Vec<JointReport>,
    pub registration_seconds: f64,
}

pub fn reconstruct(atlas: &SpineModel, targets: &SpineModel, config: &PipelineConfig) -> Result<Reconstruction> {
    let params = config.registration_params()?;
    let registration = register_spine(atlas, targets, &params).context("registration failed")?;
    for d in &registration.diagnostics {
        if let (Some(s), Some(t)) = (d.source_skew_deg, d.target_skew_deg) {
            log::debug!("{}: frame skew atlas {s:.3}°, target {t:.3}°", d.level);
        }
    }
    let (spine, joints) = if config.facet.enabled {
        align_facets(&registration.registered, &config.facet.params()).context("facet alignment failed")?
    } else {
        (registration.registered, Vec::new())
    };
    Ok(Reconstruction {
        spine,
        transforms: registration.transforms,
        joints,
        registration_seconds: registration.elapsed,
    })
}

/// Metadata written next to a reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub mode: RegistrationMode,
    pub levels: Vec<Level>,
    pub facets_aligned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingInfo {
    pub registration_s: f64,
}

fn transform_records(transforms: &[(Level, Transform4)]) -> Vec<TransformRecord> {
    transforms
        .iter()
        .map(|(l, t)| TransformRecord {
            level: l.to_string(),
            matrix: t.to_rows(),
        })
        .collect()
}

fn cmd_reconstruct(args: &ReconstructArgs, config: &PipelineConfig) -> Result<()> {
    let atlas = load_mesh_dir(&args.atlas).context("loading atlas")?;
    let targets = load_mesh_dir(&args.targets).context("loading targets")?;
    if let Err(e) = atlas.check_same_levels(&targets) {
        bail!(
            "atlas {} and targets {} do not match: {e}",
            args.atlas.display(),
            args.targets.display()
        );
    }
    let result = reconstruct(&atlas, &targets, config)?;
    println!(
        "stage=registration mode={} levels={} time_s={:.6}",
        config.registration.mode,
        result.transforms.len(),
        result.registration_seconds
    );
    if config.facet.enabled {
        let converged = result.joints.iter().filter(|j| j.converged).count();
        println!("stage=facets joints={} converged={converged}", result.joints.len());
    }

    let (mesh_dir, lm_dir) = (args.out.join("meshes"), args.out.join("landmarks"));
    create_dir(&mesh_dir)?;
    create_dir(&lm_dir)?;
    for v in result.spine.vertebrae() {
        write_mesh(
            &mesh_dir,
            v.level,
            &v.mesh,
            config.output.format,
            config.output.encoding,
        )?;
        if let Some(l) = &v.landmarks {
            write_landmarks(&lm_dir, v.level, l)?;
        }
    }
    write_json(
        &args.out.join("transforms.json"),
        &transform_records(&result.transforms),
    )?;
    if config.facet.enabled {
        write_json(&args.out.join("facets.json"), &result.joints)?;
    }
    write_json(
        &args.out.join("run.json"),
        &RunInfo {
            mode: config.registration.mode,
            levels: result.spine.levels(),
            facets_aligned: config.facet.enabled,
        },
    )?;
    if let Some(path) = &args.timing_file {
        write_json(
            path,
            &TimingInfo {
                registration_s: result.registration_seconds,
            },
        )?;
    }
    println!("stage=write out={}", args.out.display());
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

fn cmd_evaluate(args: &EvaluateArgs, config: &PipelineConfig) -> Result<()> {
    let mesh_dir = args.registered.join("meshes");
    let mesh_dir = if mesh_dir.is_dir() {
        mesh_dir
    } else {
        args.registered.clone()
    };
    let mut registered = load_mesh_dir(&mesh_dir).context("loading registered meshes")?;
    let lm_dir = args.registered.join("landmarks");
    if lm_dir.is_dir() {
        let sets = load_landmark_dir(&lm_dir)?;
        for v in registered.vertebrae_mut() {
            v.landmarks = sets.iter().find(|(l, _)| *l == v.level).map(|(_, s)| *s);
        }
    }
    let run_path = args.registered.join("run.json");
    let mode = if run_path.is_file() {
        read_json::<RunInfo>(&run_path)?.mode
    } else {
        config.registration.mode
    };
    let truth = load_mesh_dir(&args.ground_truth).context("loading ground truth")?;
    let gt_landmarks = match &args.gt_landmarks {
        Some(dir) => Some(load_landmark_dir(dir)?),
        None => {
            log::warn!("no ground-truth landmarks given; landmark and morphometric errors are left empty");
            None
        }
    };
    let mut report: RegistrationReport =
        evaluate_reconstruction(&registered, &truth, gt_landmarks.as_deref(), mode.as_str())?;
    if let Some(path) = &args.timing {
        report.time_s = Some(read_json::<TimingInfo>(path)?.registration_s);
    }
    let facets = args.registered.join("facets.json");
    if facets.is_file() {
        report.facet_joints = read_json(&facets)?;
    }
    create_dir(&args.out)?;
    write_json(&args.out.join("report.json"), &report)?;
    std::fs::write(
        args.out.join("report.csv"),
        reports_to_csv(std::slice::from_ref(&report)),
    )
    .with_context(|| format!("cannot write report.csv in {}", args.out.display()))?;
    let fmt = |v: Option<f64>| v.map_or("".to_string(), |x| format!("{x:.6}"));
    println!(
        "stage=evaluate mode={} levels={} p2m_vb_mm={} p2m_full_mm={} landmark_mae_mm={}",
        report.mode,
        report.levels.len(),
        fmt(report.mean.p2m_vb_mm),
        fmt(report.mean.p2m_full_mm),
        fmt(report.mean.landmark_mae_mm)
    );
    Ok(())
}

fn cmd_synth(args: &SynthArgs, config: &PipelineConfig) -> Result<()> {
    let mut params: SpineParams = match &args.params {
        Some(p) => read_json(p)?,
        None => SpineParams::default(),
    };
    if args.params.is_none() || config.seed != 0 {
        params.seed = config.seed;
    }
    let perturbation: Perturbation = match &args.perturbation {
        Some(p) => read_json(p)?,
        None => Perturbation::default(),
    };
    params.validate()?;
    perturbation.validate()?;
    if config.output.format != MeshFormat::Ply {
        log::warn!("synthetic meshes are written as PLY to keep region labels");
    }
    let generated = generate_spine(&params)?;
    let spine_dir = args.out.join("spine");
    let lm_dir = args.out.join("landmarks");
    create_dir(&spine_dir)?;
    create_dir(&lm_dir)?;
    let enc = config.output.encoding;
    for v in generated.spine.vertebrae() {
        write_mesh(&spine_dir, v.level, &v.mesh, MeshFormat::Ply, enc)?;
        write_landmarks(&lm_dir, v.level, v.landmarks.as_ref().expect("generated landmarks"))?;
    }
    write_json(&args.out.join("morphometrics.json"), &generated.morphometrics)?;
    let poses: Vec<_> = generated
        .spine
        .levels()
        .into_iter()
        .zip(generated.poses.iter().copied())
        .collect();
    write_json(&args.out.join("poses.json"), &transform_records(&poses))?;
    write_json(&args.out.join("params.json"), &params)?;
    println!(
        "stage=synth levels={} out={}",
        generated.spine.len(),
        args.out.display()
    );

    if args.case {
        let case = make_registration_case(&generated.spine, &perturbation, params.seed)?;
        let root = args.out.join("case");
        let (targets, truth, truth_lm) = (root.join("targets"), root.join("truth"), root.join("truth_landmarks"));
        for d in [&targets, &truth, &truth_lm] {
            create_dir(d)?;
        }
        for (t, g) in case.targets.vertebrae().iter().zip(case.truth.vertebrae()) {
            write_mesh(&targets, t.level, &t.mesh, MeshFormat::Ply, enc)?;
            write_mesh(&truth, g.level, &g.mesh, MeshFormat::Ply, enc)?;
            write_landmarks(&truth_lm, g.level, g.landmarks.as_ref().expect("truth landmarks"))?;
        }
        let transforms: Vec<_> = case
            .truth
            .levels()
            .into_iter()
            .zip(case.true_transforms.iter().copied())
            .collect();
        write_json(&root.join("true_transforms.json"), &transform_records(&transforms))?;
        write_json(&root.join("perturbation.json"), &perturbation)?;
        println!("stage=case levels={} out={}", case.targets.len(), root.display());
    }
    Ok(())
}

/// Sets up logging and the worker pool, runs the command and maps the
/// outcome to an exit code.
pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> std::process::ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                std::process::ExitCode::from(2)
            } else {
                std::process::ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return std::process::ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
