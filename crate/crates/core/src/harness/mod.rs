//! Synthetic scenes, end-to-end evaluation and benchmarking.

pub mod bench;
pub mod eval;
pub mod synth;

pub use bench::{bench, bench_scenes, BenchReport, FRAME_BUDGET_MS};
pub use eval::{
    handled_scenes, primitive_scenes, run_eval, simulate_approach, Approach, ApproachSim,
    ErrorStats, EvalConfig, EvalReport, Percentiles, ScoreSource, TimingReport,
};
pub use synth::{
    synth_scene, CameraSpec, NoiseModel, ObjectSpec, SceneSpec, SceneTruth, Shape, SyntheticFrame,
};
