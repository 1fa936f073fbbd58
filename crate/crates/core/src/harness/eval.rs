use std::collections::BTreeMap;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::synth::{
    synth_scene, NoiseModel, ObjectSpec, SceneSpec, Shape, SynthError, SyntheticFrame,
};
use crate::cloud::{CategoryCode, Scores};
use crate::grasp::{
    detect_frame, rmse_pair_distance, GraspMode, PipelineConfig, SceneObjects, StageTimings,
};
use crate::intent::{
    approach_metrics, nearest_target, Observation, PalmRay, PoseSample, TriggerConfig, TriggerState,
};
use crate::segmentation::{IouCounts, IouReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    /// No scores: every object is handled in simple mode.
    #[default]
    None,
    /// One-hot scores built from the ground-truth labels.
    OneHotTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApproachSim {
    /// Palm speed toward the selected target, m/s.
    pub speed: f64,
    pub rate_hz: f64,
    pub max_duration: f64,
    /// The palm stops advancing once this close to the target.
    pub stop_range: f64,
}

impl Default for ApproachSim {
    fn default() -> Self {
        Self {
            speed: 0.1,
            rate_hz: 30.0,
            max_duration: 15.0,
            stop_range: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct EvalConfig {
    pub pipeline: PipelineConfig,
    pub scores: ScoreSource,
    pub trigger: TriggerConfig,
    pub approach: ApproachSim,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub rmse: f64,
    pub mean_abs_error: f64,
    pub mean_error: f64,
    /// Standard deviation of the signed error.
    pub std: f64,
}

impl ErrorStats {
    /// Statistics of `estimates[i] - truths[i]`. `None` when empty.
    pub fn from_pairs(estimates: &[f64], truths: &[f64]) -> Option<Self> {
        if estimates.is_empty() {
            return None;
        }
        let n = estimates.len() as f64;
        let errors: Vec<f64> = estimates.iter().zip(truths).map(|(e, t)| e - t).collect();
        let mean_error = errors.iter().sum::<f64>() / n;
        // rmse over (estimate - truth) with per-sample truth equals rmse of
        // the errors against zero.
        let rmse = rmse_pair_distance(&errors, 0.0).ok()?;
        Some(Self {
            count: errors.len(),
            rmse,
            mean_abs_error: errors.iter().map(|e| e.abs()).sum::<f64>() / n,
            mean_error,
            std: (errors.iter().map(|e| (e - mean_error).powi(2)).sum::<f64>() / n).sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p95: f64,
    pub mean: f64,
}

impl Percentiles {
    /// Linearly interpolated percentiles. Panics on an empty slice.
    pub fn of(samples: &[f64]) -> Self {
        assert!(!samples.is_empty(), "percentiles of an empty sample");
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let at = |q: f64| {
            let x = q * (s.len() - 1) as f64;
            let (i, f) = (x.floor() as usize, x.fract());
            if i + 1 < s.len() {
                s[i] * (1.0 - f) + s[i + 1] * f
            } else {
                s[i]
            }
        };
        Self {
            p50: at(0.5),
            p95: at(0.95),
            mean: s.iter().sum::<f64>() / s.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub stages: BTreeMap<String, Percentiles>,
    pub end_to_end: Percentiles,
}

impl TimingReport {
    pub fn from_timings(timings: &[StageTimings]) -> Option<Self> {
        if timings.is_empty() {
            return None;
        }
        let stages = StageTimings::NAMES
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let col: Vec<f64> = timings.iter().map(|t| t.as_array()[k]).collect();
                (name.to_string(), Percentiles::of(&col))
            })
            .collect();
        let totals: Vec<f64> = timings.iter().map(StageTimings::total).collect();
        Some(Self {
            stages,
            end_to_end: Percentiles::of(&totals),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub frame: usize,
    pub object: usize,
    pub kind: String,
    pub mode: GraspMode,
    pub truth: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFailure {
    pub frame: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerOutcome {
    pub frame: usize,
    pub target: usize,
    pub armed_at: Option<f64>,
    pub close_t: Option<f64>,
    pub time_to_completion: Option<f64>,
    pub travel_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: usize,
    pub failed_frames: usize,
    pub failures: Vec<FrameFailure>,
    /// Ground-truth objects with no detection to match.
    pub missed_objects: usize,
    /// Detections left over after matching.
    pub spurious_detections: usize,
    pub overall: Option<ErrorStats>,
    pub per_kind: BTreeMap<String, ErrorStats>,
    pub per_mode: BTreeMap<String, ErrorStats>,
    pub iou: IouReport,
    pub triggers: Vec<TriggerOutcome>,
    pub estimates: Vec<Estimate>,
    /// Wall-clock latencies; excluded from determinism comparisons.
    pub timing: Option<TimingReport>,
}

impl EvalReport {
    /// The report without its timing section, for bit-equality checks.
    pub fn without_timing(&self) -> Self {
        Self {
            timing: None,
            ..self.clone()
        }
    }
}

/// Matches each truth object to the nearest unused detection of the
/// expected mode (any mode when none is left), by grasp midpoint distance
/// to the object's reference center.
fn match_objects(scene: &SceneObjects, frame: &SyntheticFrame) -> (Vec<Option<usize>>, usize) {
    let mut used = vec![false; scene.objects.len()];
    let mut out = Vec::with_capacity(frame.truth.objects.len());
    for t in &frame.truth.objects {
        let dist = |k: usize| (scene.objects[k].grasp.midpoint() - t.reference_center).norm();
        let pick = |same_mode: bool| {
            (0..scene.objects.len())
                .filter(|&k| !used[k] && (!same_mode || scene.objects[k].mode == t.mode))
                .min_by(|&a, &b| dist(a).total_cmp(&dist(b)))
        };
        let k = pick(true).or_else(|| pick(false));
        if let Some(k) = k {
            used[k] = true;
        }
        out.push(k);
    }
    let spurious = used.iter().filter(|u| !**u).count();
    (out, spurious)
}

/// Result of one scripted reach.
#[derive(Debug, Clone, PartialEq)]
pub struct Approach {
    /// Target of the close command, or the initial target when none fired.
    pub target: usize,
    pub armed_at: Option<f64>,
    pub close_t: Option<f64>,
    pub poses: Vec<PoseSample>,
}

/// Scripted reach: the palm starts at the camera, looks along its optical
/// axis, and advances toward the initially selected target at a constant
/// speed while the trigger is stepped at `rate_hz`.
pub fn simulate_approach(
    scene: &SceneObjects,
    trigger: &TriggerConfig,
    sim: &ApproachSim,
) -> Option<Approach> {
    let start = PalmRay::new(Point3::origin(), nalgebra::Vector3::z()).ok()?;
    let first = nearest_target(scene, &start).ok()?;
    let goal = scene
        .objects
        .iter()
        .find(|o| o.id == first.object_id)?
        .grasp
        .midpoint();
    let heading = (goal - start.origin).normalize();
    let mut state = TriggerState::new();
    let mut poses = Vec::new();
    let mut armed_at = None;
    let steps = (sim.max_duration * sim.rate_hz).ceil() as usize;
    for k in 0..=steps {
        let t = k as f64 / sim.rate_hz;
        let travel = (sim.speed * t)
            .min((goal - start.origin).norm() - sim.stop_range)
            .max(0.0);
        let ray = PalmRay::new(start.origin + heading * travel, heading).ok()?;
        poses.push(PoseSample {
            t,
            origin: ray.origin,
            direction: ray.direction,
        });
        let target = nearest_target(scene, &ray).ok()?;
        let obs = Observation {
            object_id: target.object_id,
            range: target.range,
            t,
        };
        let closed = state.step(obs, trigger).ok()?;
        if armed_at.is_none() {
            if let crate::intent::Phase::Armed { armed_at: a, .. } = state.phase() {
                armed_at = Some(a);
            }
        }
        if let Some(cmd) = closed {
            return Some(Approach {
                target: cmd.target,
                armed_at,
                close_t: Some(cmd.t),
                poses,
            });
        }
    }
    Some(Approach {
        target: first.object_id,
        armed_at,
        close_t: None,
        poses,
    })
}

/// Runs the pipeline on every scene and aggregates accuracy, segmentation
/// and trigger statistics. Per-frame pipeline errors are recorded, not
/// propagated; only an invalid scene spec fails the run.
pub fn run_eval(scenes: &[SceneSpec], config: &EvalConfig) -> Result<EvalReport, SynthError> {
    let mut failures = Vec::new();
    let mut estimates = Vec::new();
    let mut timings = Vec::new();
    let mut iou = IouCounts::default();
    let mut triggers = Vec::new();
    let (mut missed, mut spurious) = (0, 0);

    for (fi, spec) in scenes.iter().enumerate() {
        let frame = synth_scene(spec)?;
        let scores = match config.scores {
            ScoreSource::None => None,
            ScoreSource::OneHotTruth => Some(Scores::one_hot(&frame.labels)),
        };
        let det = match detect_frame(
            &frame.frame,
            &frame.intrinsics,
            scores.as_ref(),
            &config.pipeline,
        ) {
            Ok(d) => d,
            Err(e) => {
                failures.push(FrameFailure {
                    frame: fi,
                    error: e.to_string(),
                });
                missed += frame.truth.objects.len();
                continue;
            }
        };
        timings.push(det.timings);

        let truth_labels: Vec<CategoryCode> = det
            .pixels
            .iter()
            .map(|&p| frame.labels[p as usize])
            .collect();
        let pred_labels = det.scene.point_labels(det.cloud.len());
        iou.add(&pred_labels, &truth_labels)
            .expect("labels sized to cloud");

        let (matches, extra) = match_objects(&det.scene, &frame);
        spurious += extra;
        for (t, m) in frame.truth.objects.iter().zip(matches) {
            match m {
                Some(k) => {
                    let obj = &det.scene.objects[k];
                    estimates.push(Estimate {
                        frame: fi,
                        object: t.index,
                        kind: t.kind.clone(),
                        mode: obj.mode,
                        truth: t.pair_distance,
                        estimate: obj.grasp.pair_distance,
                    });
                }
                None => missed += 1,
            }
        }

        if let Some(Approach {
            target,
            armed_at,
            close_t,
            poses,
        }) = simulate_approach(&det.scene, &config.trigger, &config.approach)
        {
            let metrics = close_t.and_then(|c| approach_metrics(&poses, c).ok());
            triggers.push(TriggerOutcome {
                frame: fi,
                target,
                armed_at,
                close_t,
                time_to_completion: metrics.map(|m| m.time_to_completion),
                travel_length: metrics.map(|m| m.travel_length),
            });
        }
    }

    let group = |key: &dyn Fn(&Estimate) -> String| {
        let mut groups: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for e in &estimates {
            let g = groups.entry(key(e)).or_default();
            g.0.push(e.estimate);
            g.1.push(e.truth);
        }
        groups
            .into_iter()
            .filter_map(|(k, (est, tru))| ErrorStats::from_pairs(&est, &tru).map(|s| (k, s)))
            .collect::<BTreeMap<_, _>>()
    };
    let est: Vec<f64> = estimates.iter().map(|e| e.estimate).collect();
    let tru: Vec<f64> = estimates.iter().map(|e| e.truth).collect();
    Ok(EvalReport {
        frames: scenes.len(),
        failed_frames: failures.len(),
        failures,
        missed_objects: missed,
        spurious_detections: spurious,
        overall: ErrorStats::from_pairs(&est, &tru),
        per_kind: group(&|e| e.kind.clone()),
        per_mode: group(&|e| {
            match e.mode {
                GraspMode::Simple => "simple",
                GraspMode::Complex => "complex",
            }
            .to_string()
        }),
        iou: iou.report(),
        triggers,
        estimates,
        timing: TimingReport::from_timings(&timings),
    })
}

fn place(shape: Shape, rng: &mut ChaCha8Rng) -> ObjectSpec {
    // Offsets keep the camera nadir inside the footprint so only the top
    // of the object is visible.
    let (ax, ay) = match shape {
        Shape::Cuboid { length, width, .. } => (0.3 * length / 2.0, 0.3 * width / 2.0),
        Shape::Sphere { radius } => (0.3 * radius, 0.3 * radius),
        Shape::Cylinder {
            radius,
            length,
            lying,
        } => {
            if lying {
                (0.3 * length / 2.0, 0.3 * radius)
            } else {
                (0.3 * radius, 0.3 * radius)
            }
        }
        Shape::Handled { .. } => (0.0, 0.0),
    };
    let yaw: f64 = rng.random_range(0.0..180.0);
    let (s, c) = yaw.to_radians().sin_cos();
    let (dx, dy) = (rng.random_range(-ax..=ax), rng.random_range(-ay..=ay));
    ObjectSpec {
        shape,
        position: [-(c * dx - s * dy), -(s * dx + c * dy)],
        yaw_deg: yaw,
    }
}

/// Lowest camera height at which the whole footprint stays inside the
/// frame after the default edge margin, with 20 % slack.
fn min_framing_height(shape: &Shape, spec: &SceneSpec) -> f64 {
    let (diagonal, top) = match *shape {
        Shape::Cuboid {
            length,
            width,
            height,
        } => (length.hypot(width), height),
        Shape::Sphere { radius } => (2.0 * radius, 2.0 * radius),
        Shape::Cylinder {
            radius,
            length,
            lying: false,
        } => (2.0 * radius, length),
        Shape::Cylinder {
            radius,
            length,
            lying: true,
        } => (length.hypot(2.0 * radius), 2.0 * radius),
        Shape::Handled {
            body_radius,
            body_height,
            handle_length,
            ..
        } => (2.0 * (body_radius + handle_length), body_height),
    };
    let c = &spec.camera;
    let usable =
        (c.width.min(c.height_px) as f64 - 2.0 * crate::cloud::DEFAULT_EDGE_MARGIN as f64).max(1.0);
    top + 1.2 * diagonal * c.focal / usable
}

/// Random single-primitive scenes cycling cuboid, sphere, upright and lying
/// cylinder, with the camera height swept over `[0.3, 1.0]` m. Heights
/// too low to frame the whole object are raised until it fits.
pub fn primitive_scenes(count: usize, seed: u64, noise: NoiseModel) -> Vec<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let shape = match i % 4 {
                0 => {
                    let width = rng.random_range(0.03..0.07);
                    Shape::Cuboid {
                        length: width * rng.random_range(1.5..2.5),
                        width,
                        height: rng.random_range(0.03..0.10),
                    }
                }
                1 => Shape::Sphere {
                    radius: rng.random_range(0.02..0.04),
                },
                2 => Shape::Cylinder {
                    radius: rng.random_range(0.02..0.04),
                    length: rng.random_range(0.06..0.15),
                    lying: false,
                },
                _ => Shape::Cylinder {
                    radius: rng.random_range(0.015..0.03),
                    length: rng.random_range(0.10..0.18),
                    lying: true,
                },
            };
            let mut spec = SceneSpec::single(shape);
            spec.objects[0] = place(shape, &mut rng);
            let sweep = 0.3 + 0.7 * (i as f64 + 0.5) / count as f64;
            spec.camera.height = sweep.max(min_framing_height(&shape, &spec));
            spec.noise = noise;
            spec.seed = rng.random();
            spec
        })
        .collect()
}

/// Random handled objects viewed from `[min_height, max_height]` with the
/// camera nadir on the handle center line.
pub fn handled_scenes(
    count: usize,
    seed: u64,
    handle_width: f64,
    heights: (f64, f64),
    noise: NoiseModel,
) -> Vec<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let body_radius = rng.random_range(0.03..0.05);
            let handle_length = rng.random_range(0.05..0.08);
            let shape = Shape::Handled {
                body_radius,
                body_height: rng.random_range(0.08..0.14),
                handle_length,
                handle_width,
                handle_thickness: rng.random_range(0.005..0.012),
            };
            let yaw: f64 = rng.random_range(0.0..360.0);
            let reach = body_radius + handle_length / 2.0;
            let (s, c) = yaw.to_radians().sin_cos();
            let mut spec = SceneSpec::single(shape);
            spec.objects[0] = ObjectSpec {
                shape,
                position: [-reach * c, -reach * s],
                yaw_deg: yaw,
            };
            let f = if count > 1 {
                i as f64 / (count - 1) as f64
            } else {
                0.5
            };
            spec.camera.height = heights.0 + (heights.1 - heights.0) * f;
            spec.noise = noise;
            spec.seed = rng.random();
            spec
        })
        .collect()
}
