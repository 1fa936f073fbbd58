//! Command-line front end shared by the `graspcloud` binary.
//!
//! Exit codes: 0 success, 1 input error, 2 pipeline failure,
//! 3 benchmark budget missed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cloud::io::{
    load_cloud, load_depth, load_intrinsics, load_labels, load_scores, save_cloud, save_depth_png,
    save_intrinsics, save_labels, save_scores, write_ply, PlyEncoding,
};
use crate::cloud::{deproject_indexed, Scores};
use crate::grasp::{detect_frame, detect_scene, SceneObjects, SceneReport};
use crate::harness::{
    bench, primitive_scenes, run_eval, synth_scene, EvalConfig, NoiseModel, ObjectSpec, SceneSpec,
    ScoreSource, Shape,
};
use crate::intent::{
    approach_metrics, nearest_target, Observation, PalmRay, Phase, PoseSample, TriggerState,
};
use crate::segmentation::iou_report;
use crate::CategoryCode;

#[derive(Debug, Parser)]
#[command(
    name = "graspcloud",
    version,
    about = "Grasp point detection on depth frames"
)]
pub struct Cli {
    /// Seed for RANSAC and scene generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with `pipeline`, `trigger`, `approach` and `scores` sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (directory for `synth`); stdout when omitted.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic scene with labels and ground truth.
    Synth(SynthArgs),
    /// Detect objects and grasp pairs in a depth frame or cloud.
    Detect(DetectArgs),
    /// Per-category IoU between predicted and ground-truth labels.
    SegmentEval(SegmentEvalArgs),
    /// Replay a palm trajectory against a detected scene.
    IntentSim(IntentSimArgs),
    /// Time the pipeline on synthetic frames against the 30 fps budget.
    Bench(BenchArgs),
    /// Evaluate accuracy, IoU and trigger timing over synthetic scenes.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Cuboid,
    Sphere,
    Cylinder,
    LyingCylinder,
    Handled,
    Spoon,
    Multi,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene spec JSON; overrides `--preset`.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cuboid")]
    pub preset: Preset,
    /// Gaussian depth noise, meters.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub outliers: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// 16-bit PNG or raw little-endian u16 depth frame.
    #[arg(long, requires = "intrinsics", conflicts_with = "cloud")]
    pub frame: Option<PathBuf>,
    #[arg(long)]
    pub intrinsics: Option<PathBuf>,
    /// PLY cloud in camera coordinates.
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    /// Score CSV: one row per pixel for `--frame`, per point for `--cloud`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Also write the labeled cloud plus grasp points (label 3) as PLY.
    #[arg(long)]
    pub ply: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentEvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct IntentSimArgs {
    /// JSON array of `{t, origin, direction}` samples.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Detection JSON as written by `detect`.
    #[arg(long)]
    pub scene: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    pub frames: usize,
    #[arg(long, default_value_t = 800)]
    pub width: usize,
    #[arg(long, default_value_t = 600)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSON array of scene specs; random primitives when omitted.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outliers: f64,
    /// Per-point category scores fed to the pipeline.
    #[arg(long, value_enum)]
    pub scores: Option<ScoreArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScoreArg {
    None,
    OneHot,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Pipeline(String),
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Pipeline(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Pipeline(m) => write!(f, "pipeline failure: {m}"),
            CliError::Budget(m) => write!(f, "budget failure: {m}"),
        }
    }
}

fn input<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Input(format!("{context}: {e}"))
}

fn pipeline<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Pipeline(e.to_string())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let file = File::open(path).map_err(input(path.display()))?;
    serde_json::from_reader(BufReader::new(file)).map_err(input(path.display()))
}

struct Sink(Box<dyn Write>);

impl Sink {
    fn open(path: Option<&Path>) -> Result<Self, CliError> {
        Ok(Sink(match path {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(input(p.display()))?)),
            None => Box::new(std::io::stdout().lock()),
        }))
    }

    fn line(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.0, "{text}").map_err(input("write"))
    }

    fn json<T: Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(pipeline)?;
        self.line(&text)?;
        self.0.flush().map_err(input("write"))
    }
}

fn preset(which: Preset) -> SceneSpec {
    let mut spec = SceneSpec::single(match which {
        Preset::Cuboid => Shape::Cuboid {
            length: 0.10,
            width: 0.04,
            height: 0.06,
        },
        Preset::Sphere => Shape::Sphere { radius: 0.035 },
        Preset::Cylinder => Shape::Cylinder {
            radius: 0.03,
            length: 0.12,
            lying: false,
        },
        Preset::LyingCylinder => Shape::Cylinder {
            radius: 0.025,
            length: 0.14,
            lying: true,
        },
        Preset::Handled | Preset::Spoon => Shape::Handled {
            body_radius: 0.04,
            body_height: 0.10,
            handle_length: 0.06,
            handle_width: if matches!(which, Preset::Spoon) {
                0.0148
            } else {
                0.022
            },
            handle_thickness: 0.008,
        },
        Preset::Multi => Shape::Sphere { radius: 0.03 },
    });
    match which {
        Preset::Handled | Preset::Spoon => spec.objects[0].position = [-0.07, 0.0],
        Preset::Multi => {
            spec.camera.height = 0.7;
            spec.objects = vec![
                ObjectSpec {
                    shape: Shape::Cuboid {
                        length: 0.10,
                        width: 0.05,
                        height: 0.06,
                    },
                    position: [-0.10, -0.04],
                    yaw_deg: 20.0,
                },
                spec.objects[0],
                ObjectSpec {
                    shape: Shape::Cylinder {
                        radius: 0.025,
                        length: 0.10,
                        lying: false,
                    },
                    position: [0.11, 0.05],
                    yaw_deg: 0.0,
                },
            ];
        }
        _ => {}
    }
    spec
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut config: EvalConfig = match &cli.config {
        Some(p) => read_json(p)?,
        None => EvalConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.pipeline.ransac.seed = seed;
    }
    config.pipeline.validate().map_err(input("config"))?;
    config.trigger.validate().map_err(input("config"))?;
    let out = cli.output.as_deref();
    match cli.command {
        Command::Synth(a) => synth(a, cli.seed, out),
        Command::Detect(a) => detect(a, &config, out),
        Command::SegmentEval(a) => segment_eval(a, out),
        Command::IntentSim(a) => intent_sim(a, &config, out),
        Command::Bench(a) => {
            if a.frames < 30 {
                return Err(CliError::Input("bench needs at least 30 frames".into()));
            }
            let report = bench(
                a.frames,
                a.width,
                a.height,
                cli.seed.unwrap_or(0),
                &config.pipeline,
            )
            .map_err(pipeline)?;
            Sink::open(out)?.json(&report)?;
            if report.pass {
                Ok(())
            } else {
                Err(CliError::Budget(format!(
                    "median latency {:.2} ms exceeds {:.1} ms ({:.1} fps)",
                    report.end_to_end.p50, report.budget_ms, report.fps
                )))
            }
        }
        Command::Eval(a) => {
            let scenes: Vec<SceneSpec> = match &a.scenes {
                Some(p) => read_json(p)?,
                None => primitive_scenes(
                    a.count,
                    cli.seed.unwrap_or(0),
                    NoiseModel {
                        depth_sigma: a.sigma,
                        outlier_fraction: a.outliers,
                    },
                ),
            };
            if let Some(sc) = a.scores {
                config.scores = match sc {
                    ScoreArg::None => ScoreSource::None,
                    ScoreArg::OneHot => ScoreSource::OneHotTruth,
                };
            }
            if scenes.is_empty() {
                return Err(CliError::Input("scene set is empty".into()));
            }
            let report = run_eval(&scenes, &config).map_err(input("scene set"))?;
            Sink::open(out)?.json(&report)
        }
    }
}

fn synth(a: SynthArgs, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let mut spec = match &a.scene {
        Some(p) => read_json(p)?,
        None => preset(a.preset),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(s) = a.sigma {
        spec.noise.depth_sigma = s;
    }
    if let Some(o) = a.outliers {
        spec.noise.outlier_fraction = o;
    }
    let frame = synth_scene(&spec).map_err(input("scene"))?;
    let dir = out.unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(input(dir.display()))?;
    let io = |e: crate::cloud::io::FormatError| CliError::Input(e.to_string());
    save_depth_png(&frame.frame, dir.join("frame.png")).map_err(io)?;
    save_intrinsics(&frame.intrinsics, dir.join("intrinsics.json")).map_err(io)?;

    let (cloud, pixels) = deproject_indexed(&frame.frame, &frame.intrinsics).map_err(pipeline)?;
    let labels: Vec<CategoryCode> = pixels.iter().map(|&p| frame.labels[p as usize]).collect();
    let cloud = cloud.with_labels(labels.clone()).map_err(pipeline)?;
    save_cloud(
        &cloud,
        dir.join("cloud.ply"),
        PlyEncoding::BinaryLittleEndian,
    )
    .map_err(io)?;
    save_labels(&labels, dir.join("labels.lbl")).map_err(io)?;
    save_scores(&Scores::one_hot(&labels), dir.join("scores.csv")).map_err(io)?;
    save_labels(&frame.labels, dir.join("pixel_labels.lbl")).map_err(io)?;
    Sink::open(Some(&dir.join("truth.json")))?.json(&frame.truth)?;
    Sink::open(Some(&dir.join("scene.json")))?.json(&spec)?;
    eprintln!(
        "wrote {} points and {} objects to {}",
        cloud.len(),
        frame.truth.objects.len(),
        dir.display()
    );
    Ok(())
}

fn detect(a: DetectArgs, config: &EvalConfig, out: Option<&Path>) -> Result<(), CliError> {
    let io = |e: crate::cloud::io::FormatError| CliError::Input(e.to_string());
    let (points, scene) = match (&a.frame, &a.cloud) {
        (Some(frame_path), None) => {
            let intr = load_intrinsics(a.intrinsics.as_ref().expect("clap enforces --intrinsics"))
                .map_err(io)?;
            let frame = load_depth(frame_path, &intr).map_err(io)?;
            let scores = match &a.scores {
                Some(p) => Some(load_scores(p, intr.width * intr.height).map_err(io)?),
                None => None,
            };
            let det =
                detect_frame(&frame, &intr, scores.as_ref(), &config.pipeline).map_err(pipeline)?;
            (det.cloud.points().to_vec(), det.scene)
        }
        (None, Some(cloud_path)) => {
            let cloud = load_cloud(cloud_path).map_err(io)?;
            let scores = match &a.scores {
                Some(p) => Some(load_scores(p, cloud.len()).map_err(io)?),
                None => None,
            };
            let scene =
                detect_scene(&cloud, scores.as_ref(), &config.pipeline).map_err(pipeline)?;
            (cloud.points().to_vec(), scene)
        }
        _ => {
            return Err(CliError::Input(
                "give either --frame with --intrinsics, or --cloud".into(),
            ))
        }
    };
    if let Some(p) = &a.ply {
        let (pts, labels) = scene.ply_dump(&points);
        let file = File::create(p).map_err(input(p.display()))?;
        write_ply(
            BufWriter::new(file),
            &pts,
            Some(&labels),
            PlyEncoding::BinaryLittleEndian,
        )
        .map_err(io)?;
    }
    Sink::open(out)?.json(&scene.report())
}

fn segment_eval(a: SegmentEvalArgs, out: Option<&Path>) -> Result<(), CliError> {
    let pred = load_labels(&a.pred).map_err(input(a.pred.display()))?;
    let truth = load_labels(&a.truth).map_err(input(a.truth.display()))?;
    let report = iou_report(&pred, &truth).map_err(input("labels"))?;
    for c in CategoryCode::ALL {
        println!("{:<10} {:.4}", c.name(), report.get(c));
    }
    if out.is_some() {
        Sink::open(out)?.json(&report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PhaseEvent {
    event: &'static str,
    t: f64,
    target: usize,
}

fn intent_sim(a: IntentSimArgs, config: &EvalConfig, out: Option<&Path>) -> Result<(), CliError> {
    let trajectory: Vec<PoseSample> = read_json(&a.trajectory)?;
    if trajectory.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(CliError::Input(
            "trajectory timestamps must increase strictly".into(),
        ));
    }
    let report: SceneReport = read_json(&a.scene)?;
    let scene = SceneObjects::from_records(report.plane, &report.objects);
    let mut sink = Sink::open(out)?;
    let mut state = TriggerState::new();
    let mut close_t = None;
    for pose in &trajectory {
        let ray = PalmRay::new(pose.origin, pose.direction).map_err(input("trajectory"))?;
        let target = nearest_target(&scene, &ray).map_err(pipeline)?;
        let before = state.phase();
        let cmd = state
            .step(
                Observation {
                    object_id: target.object_id,
                    range: target.range,
                    t: pose.t,
                },
                &config.trigger,
            )
            .map_err(input("trajectory"))?;
        match (before, state.phase()) {
            (Phase::Armed { target_id, .. }, Phase::Idle) => {
                sink.line(
                    &serde_json::to_string(&PhaseEvent {
                        event: "disarm",
                        t: pose.t,
                        target: target_id,
                    })
                    .map_err(pipeline)?,
                )?;
            }
            (Phase::Idle, Phase::Armed { target_id, .. }) => {
                sink.line(
                    &serde_json::to_string(&PhaseEvent {
                        event: "arm",
                        t: pose.t,
                        target: target_id,
                    })
                    .map_err(pipeline)?,
                )?;
            }
            (
                Phase::Armed { target_id: old, .. },
                Phase::Armed {
                    target_id,
                    armed_at,
                },
            ) if old != target_id => {
                sink.line(
                    &serde_json::to_string(&PhaseEvent {
                        event: "disarm",
                        t: pose.t,
                        target: old,
                    })
                    .map_err(pipeline)?,
                )?;
                sink.line(
                    &serde_json::to_string(&PhaseEvent {
                        event: "arm",
                        t: armed_at,
                        target: target_id,
                    })
                    .map_err(pipeline)?,
                )?;
            }
            _ => {}
        }
        if let Some(cmd) = cmd {
            sink.line(&cmd.to_json_line())?;
            close_t = Some(cmd.t);
            break;
        }
    }
    match close_t {
        Some(t) => {
            let m = approach_metrics(&trajectory, t).map_err(pipeline)?;
            sink.line(&serde_json::json!({"event": "metrics", "time_to_completion": m.time_to_completion, "travel_length": m.travel_length}).to_string())?;
            sink.0.flush().map_err(input("write"))
        }
        None => {
            sink.0.flush().map_err(input("write"))?;
            Err(CliError::Pipeline(
                "trajectory ended without a close command".into(),
            ))
        }
    }
}
