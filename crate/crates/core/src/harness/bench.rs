use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::eval::{Percentiles, TimingReport};
use super::synth::{synth_scene, NoiseModel, SceneSpec, SynthError, DEFAULT_FOCAL};
use crate::grasp::{detect_frame, PipelineConfig};

/// 30 fps frame budget in milliseconds.
pub const FRAME_BUDGET_MS: f64 = 33.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub median_points: usize,
    pub stages: BTreeMap<String, Percentiles>,
    pub end_to_end: Percentiles,
    pub fps: f64,
    pub budget_ms: f64,
    pub pass: bool,
    /// Pair distance of the first object per frame, `None` on failure.
    pub outputs: Vec<Option<f64>>,
}

/// Simple-mode benchmark scenes at the given resolution. The focal length
/// scales with the width so the field of view matches the 800 px default.
pub fn bench_scenes(frames: usize, width: usize, height: usize, seed: u64) -> Vec<SceneSpec> {
    let noise = NoiseModel {
        depth_sigma: 0.002,
        outlier_fraction: 0.005,
    };
    super::eval::primitive_scenes(frames, seed, noise)
        .into_iter()
        .map(|mut s| {
            s.camera.width = width;
            s.camera.height_px = height;
            s.camera.focal = DEFAULT_FOCAL * width as f64 / 800.0;
            s
        })
        .collect()
}

/// Times [`detect_frame`] on pre-rendered frames, one after another.
pub fn bench(
    frames: usize,
    width: usize,
    height: usize,
    seed: u64,
    config: &PipelineConfig,
) -> Result<BenchReport, SynthError> {
    let rendered = bench_scenes(frames, width, height, seed)
        .iter()
        .map(synth_scene)
        .collect::<Result<Vec<_>, _>>()?;
    let mut timings = Vec::with_capacity(frames);
    let mut points = Vec::with_capacity(frames);
    let mut outputs = Vec::with_capacity(frames);
    for f in &rendered {
        match detect_frame(&f.frame, &f.intrinsics, None, config) {
            Ok(d) => {
                timings.push(d.timings);
                points.push(d.cloud.len());
                outputs.push(d.scene.objects.first().map(|o| o.grasp.pair_distance));
            }
            Err(_) => outputs.push(None),
        }
    }
    let report = TimingReport::from_timings(&timings)
        .ok_or_else(|| SynthError::InvalidSpec("no frame succeeded".into()))?;
    points.sort_unstable();
    let median = report.end_to_end.p50;
    Ok(BenchReport {
        frames,
        width,
        height,
        median_points: points[points.len() / 2],
        stages: report.stages,
        end_to_end: report.end_to_end,
        fps: 1000.0 / median,
        budget_ms: FRAME_BUDGET_MS,
        pass: median < FRAME_BUDGET_MS,
        outputs,
    })
}
