//! Grasp point detection on depth-camera point clouds.
//!
//! The pipeline takes a depth frame and pinhole intrinsics, finds the
//! dominant support plane, isolates the objects resting on it, decides per
//! object whether it is a primitive shape or carries a handle, and emits a
//! pair of opposing grasp points. A small intent state machine turns the
//! stream of detections into a glove close command.
//!
//! ```
//! use graspcloud::grasp::detect_frame;
//! use graspcloud::harness::{synth_scene, SceneSpec, Shape};
//! use graspcloud::PipelineConfig;
//!
//! let spec = SceneSpec::single(Shape::Sphere { radius: 0.035 });
//! let synth = synth_scene(&spec).unwrap();
//! let det = detect_frame(&synth.frame, &synth.intrinsics, None, &PipelineConfig::default()).unwrap();
//! let grasp = &det.scene.objects[0].grasp;
//! assert!((grasp.pair_distance - 0.07).abs() < 2e-3);
//! ```
//!
//! Modules, bottom-up:
//!
//! - [`cloud`]: depth frames, intrinsics, masking, deprojection and file I/O.
//! - [`geometry`]: RANSAC planes, support hulls, prism extrusion, DBSCAN and
//!   PCA bounding boxes.
//! - [`segmentation`]: handle extraction from per-point category scores and IoU.
//! - [`grasp`]: grasp pairs for both modes and the end-to-end scene detector.
//! - [`intent`]: palm-ray targeting and the arm/dwell trigger.
//! - [`harness`]: synthetic scenes, evaluation and benchmarking.
//! - [`cli`]: argument parsing and dispatch behind the `graspcloud` binary.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cloud;
pub mod geometry;
pub mod grasp;
pub mod harness;
pub mod intent;
pub mod segmentation;

pub use cloud::{CameraIntrinsics, CategoryCode, DepthFrame, PointCloud, Scores};
pub use geometry::{Clustering, ConvexPolygon2D, OrientedBoundingBox, Plane, PlaneFit, Prism};
pub use grasp::{GraspMode, GraspPair, PipelineConfig, SceneObject, SceneObjects};
pub use intent::{PalmRay, TriggerConfig, TriggerState};
