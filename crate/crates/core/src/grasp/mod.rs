//! Grasp pairs for primitive shapes and handles, and the scene detector.

mod scene;

pub use scene::{
    detect_frame, detect_scene, detect_scene_timed, FrameDetection, ObjectRecord, PipelineConfig,
    SceneObject, SceneObjects, SceneReport, StageTimings, SupportFilterParams, GRASP_POINT_LABEL,
};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::CloudError;
use crate::geometry::{pca_obb, GeometryError, OrientedBoundingBox, Plane};
use crate::segmentation::HandleCloud;

/// `sin 30°`: axes with `|axis · normal|` at or below this count as
/// parallel to the support plane.
pub const PARALLEL_GATE: f64 = 0.5;

/// Relative depth of the side band searched by [`handle_grasp`]: points
/// whose offset along the minor axis reaches `1 - SIDE_BAND` of the largest
/// such offset.
pub const SIDE_BAND: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraspError {
    #[error("handle is degenerate (fewer than 3 points or collinear)")]
    DegenerateHandle,
    #[error("no estimates given")]
    EmptyInput,
    #[error("no support plane found: {0}")]
    NoPlaneFound(GeometryError),
    #[error("no object clusters above the support plane")]
    EmptyScene,
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspMode {
    Simple,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPair {
    pub p1: Point3<f64>,
    pub p2: Point3<f64>,
    /// Unit direction from `p1` to `p2`.
    pub approach_axis: Vector3<f64>,
    pub pair_distance: f64,
    pub mode: GraspMode,
    pub object_id: usize,
}

impl GraspPair {
    fn from_points(p1: Point3<f64>, p2: Point3<f64>, mode: GraspMode) -> Self {
        let delta = p2 - p1;
        let pair_distance = delta.norm();
        Self {
            p1,
            p2,
            approach_axis: delta / pair_distance,
            pair_distance,
            mode,
            object_id: 0,
        }
    }

    pub fn midpoint(&self) -> Point3<f64> {
        nalgebra::center(&self.p1, &self.p2)
    }

    pub fn with_id(mut self, object_id: usize) -> Self {
        self.object_id = object_id;
        self
    }
}

/// Index of the plane-parallel axis with the smallest extent, or of the
/// most plane-parallel axis when none passes [`PARALLEL_GATE`].
fn minor_parallel_axis(
    axes: &[Vector3<f64>; 3],
    extents: &[f64; 3],
    normal: &Vector3<f64>,
) -> usize {
    let tilt: Vec<f64> = axes.iter().map(|a| a.dot(normal).abs()).collect();
    let gated = (0..3).filter(|&i| tilt[i] <= PARALLEL_GATE).fold(
        None,
        |best: Option<usize>, i| match best {
            Some(b) if extents[b] <= extents[i] => Some(b),
            _ => Some(i),
        },
    );
    gated.unwrap_or_else(|| (0..3).fold(0, |b, i| if tilt[i] < tilt[b] { i } else { b }))
}

/// Opposing face centers of the box along its plane-parallel minor axis.
/// The returned `object_id` is 0; callers assign it with [`GraspPair::with_id`].
pub fn simple_grasp(obb: &OrientedBoundingBox, support: &Plane) -> GraspPair {
    let k = minor_parallel_axis(&obb.axes, &obb.half_extents, &support.normal);
    let offset = obb.axes[k] * obb.half_extents[k];
    GraspPair::from_points(obb.center - offset, obb.center + offset, GraspMode::Simple)
}

/// Centroid-vector heuristic: among the points on the sides of the handle,
/// the one whose offset from the centroid is closest in angle to the
/// plane-parallel minor axis, and its reflection through the centroid.
///
/// The minor axis is chosen among the handle's PCA axes with the same
/// parallelism gate as [`simple_grasp`], then projected onto the support
/// plane. The sides are the points within [`SIDE_BAND`] of the largest
/// offset along that axis; the axis is undirected.
pub fn handle_grasp(handle: &HandleCloud, support: &Plane) -> Result<GraspPair, GraspError> {
    let pts = &handle.points;
    let obb = pca_obb(pts).map_err(|_| GraspError::DegenerateHandle)?;
    if obb.half_extents[1] < 1e-9 {
        return Err(GraspError::DegenerateHandle);
    }
    let m = handle.centroid().ok_or(GraspError::DegenerateHandle)?;

    let n = support.normal;
    let raw = obb.axes[minor_parallel_axis(&obb.axes, &obb.half_extents, &n)];
    let projected = raw - n * raw.dot(&n);
    let axis = if projected.norm() < 1e-6 {
        raw
    } else {
        projected.normalize()
    };

    let reach: Vec<f64> = pts.iter().map(|p| (p - m).dot(&axis).abs()).collect();
    let side = reach.iter().copied().fold(0.0, f64::max) * (1.0 - SIDE_BAND);
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in pts.iter().enumerate() {
        let v = p - m;
        let len = v.norm();
        if len < 1e-12 || reach[i] < side {
            continue;
        }
        let cos = v.dot(&axis).abs() / len;
        if best.is_none_or(|(_, c)| cos > c) {
            best = Some((i, cos));
        }
    }
    let (i, _) = best.ok_or(GraspError::DegenerateHandle)?;
    let p1 = pts[i];
    let p2 = Point3::from(m.coords * 2.0 - p1.coords);
    Ok(GraspPair::from_points(p1, p2, GraspMode::Complex))
}

pub fn rmse_pair_distance(estimates: &[f64], truth: f64) -> Result<f64, GraspError> {
    if estimates.is_empty() {
        return Err(GraspError::EmptyInput);
    }
    let sum: f64 = estimates.iter().map(|e| (e - truth).powi(2)).sum();
    Ok((sum / estimates.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::obb::tests::cuboid_grid;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table() -> Plane {
        Plane::new(Vector3::z(), 0.0).unwrap()
    }

    fn handle(points: Vec<Point3<f64>>) -> HandleCloud {
        HandleCloud {
            source_indices: (0..points.len()).collect(),
            points,
        }
    }

    #[test]
    fn cuboid_grasps_across_its_width() {
        let pts: Vec<_> = cuboid_grid([0.10, 0.04, 0.06], [20, 8, 12])
            .into_iter()
            .map(|p| p + Vector3::new(0.3, -0.1, 0.03))
            .collect();
        let obb = pca_obb(&pts).unwrap();
        let g = simple_grasp(&obb, &table());
        assert!((g.pair_distance - 0.04).abs() < 1e-9);
        assert!(g.approach_axis.dot(&Vector3::y()).abs() > 1.0 - 1e-9);
        assert!(
            (g.p1 - Point3::new(0.3, -0.12, 0.03)).norm() < 1e-9
                || (g.p2 - Point3::new(0.3, -0.12, 0.03)).norm() < 1e-9
        );
        assert!((g.midpoint() - obb.center).norm() < 1e-15);
        assert_eq!(g.mode, GraspMode::Simple);
    }

    #[test]
    fn gate_skips_thin_vertical_axis() {
        // A flat plate: its smallest extent is vertical and must be skipped.
        let pts = cuboid_grid([0.12, 0.05, 0.01], [12, 5, 1]);
        let g = simple_grasp(&pca_obb(&pts).unwrap(), &table());
        assert!((g.pair_distance - 0.05).abs() < 1e-9);
    }

    #[test]
    fn fallback_picks_most_parallel_axis() {
        let obb = OrientedBoundingBox {
            center: Point3::origin(),
            axes: [Vector3::x(), Vector3::y(), Vector3::z()],
            half_extents: [0.05, 0.02, 0.01],
        };
        // Every axis is more than 30 degrees off this plane; x is the least tilted.
        let plane = Plane::new(Vector3::new(1.0, 1.05, 1.1), -0.2).unwrap();
        assert!(obb
            .axes
            .iter()
            .all(|a| a.dot(&plane.normal).abs() > PARALLEL_GATE));
        let g = simple_grasp(&obb, &plane);
        assert!((g.pair_distance - 0.10).abs() < 1e-12);
        assert!((g.approach_axis - Vector3::x()).norm() < 1e-12);
    }

    #[test]
    fn sphere_pair_is_diameter() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r = 0.035;
        let pts: Vec<_> = (0..6000)
            .map(|_| {
                let z: f64 = rng.random_range(-1.0..1.0);
                let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let s = (1.0 - z * z).sqrt();
                Point3::new(r * s * t.cos(), r * s * t.sin(), r + r * z)
            })
            .collect();
        let g = simple_grasp(&pca_obb(&pts).unwrap(), &table());
        assert!((g.pair_distance - 2.0 * r).abs() < 0.02 * 2.0 * r);
        assert!(g.approach_axis.z.abs() <= PARALLEL_GATE);
    }

    fn cylinder_handle() -> Vec<Point3<f64>> {
        let mut pts = Vec::new();
        for i in 0..=100 {
            for k in 0..72 {
                let t = k as f64 * std::f64::consts::TAU / 72.0;
                pts.push(Point3::new(
                    0.2 + i as f64 * 0.001,
                    0.05 + 0.01 * t.cos(),
                    0.03 + 0.01 * t.sin(),
                ));
            }
        }
        pts
    }

    /// Independent minimization over all points, comparing angles directly.
    fn brute_force_p1(pts: &[Point3<f64>], m: &Point3<f64>, axis: &Vector3<f64>) -> usize {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in pts.iter().enumerate() {
            let v = p - m;
            if v.norm() < 1e-12 {
                continue;
            }
            let angle = v.angle(axis);
            let acute = angle.min(std::f64::consts::PI - angle);
            if acute < best.1 - 1e-12 {
                best = (i, acute);
            }
        }
        best.0
    }

    #[test]
    fn cylindrical_handle_grasp() {
        let pts = cylinder_handle();
        let h = handle(pts.clone());
        let g = handle_grasp(&h, &table()).unwrap();
        let m = h.centroid().unwrap();
        assert!(g.approach_axis.dot(&Vector3::y()).abs() > 0.999);
        assert!((g.pair_distance - 0.02).abs() < 1e-4);
        let i = brute_force_p1(&pts, &m, &Vector3::y());
        assert!(
            (pts[i] - g.p1).norm() < 1e-3,
            "p1 {:?} vs {:?}",
            g.p1,
            pts[i]
        );
        assert!((g.midpoint() - m).norm() < 1e-9);
        assert!(pts.contains(&g.p1));
    }

    #[test]
    fn square_frame_reflects_exactly() {
        let mut pts = Vec::new();
        for i in 0..20 {
            let s = -0.02 + 0.002 * i as f64;
            pts.extend([
                Point3::new(s, -0.02, 0.0),
                Point3::new(0.02, s, 0.0),
                Point3::new(-s, 0.02, 0.0),
                Point3::new(-0.02, -s, 0.0),
            ]);
        }
        let h = handle(pts.clone());
        let g = handle_grasp(&h, &table()).unwrap();
        let m = h.centroid().unwrap();
        assert!((g.p2.coords - (2.0 * m.coords - g.p1.coords)).norm() < 1e-15);
        assert!((g.midpoint() - m).norm() < 1e-9);
        assert!(pts.contains(&g.p1));
    }

    #[test]
    fn spoon_width_handle() {
        // Flat top face of a 1.48 cm wide bar, sampled on a 0.5 mm grid.
        let w = 0.0148;
        let mut pts = Vec::new();
        for i in 0..=160 {
            for j in 0..=29 {
                pts.push(Point3::new(
                    i as f64 * 5e-4,
                    -w / 2.0 + j as f64 * (w / 29.0),
                    0.02,
                ));
            }
        }
        let g = handle_grasp(&handle(pts), &table()).unwrap();
        assert!((g.pair_distance - w).abs() < 1e-3);
    }

    #[test]
    fn degenerate_handles() {
        let line: Vec<_> = (0..10)
            .map(|i| Point3::new(i as f64 * 0.01, 0.0, 0.0))
            .collect();
        assert_eq!(
            handle_grasp(&handle(line), &table()),
            Err(GraspError::DegenerateHandle)
        );
        let two = vec![Point3::origin(), Point3::new(0.01, 0.0, 0.0)];
        assert_eq!(
            handle_grasp(&handle(two), &table()),
            Err(GraspError::DegenerateHandle)
        );
    }

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse_pair_distance(&[0.04; 5], 0.04).unwrap(), 0.0);
        assert!((rmse_pair_distance(&[0.05, 0.03], 0.04).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(rmse_pair_distance(&[], 0.04), Err(GraspError::EmptyInput));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est: Vec<f64> = (0..100)
            .map(|_| 0.04 + rng.random_range(-0.005..0.005))
            .collect();
        let mut acc = 0.0;
        for e in &est {
            acc += (e - 0.04) * (e - 0.04);
        }
        let direct = (acc / 100.0).sqrt();
        assert!((rmse_pair_distance(&est, 0.04).unwrap() - direct).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn handle_grasp_invariants(
            pts in proptest::collection::vec((-0.05f64..0.05, -0.02f64..0.02, 0.0f64..0.01), 3..80),
            axis in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
            angle in 0.0..std::f64::consts::TAU,
        ) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect();
            let h = handle(pts.clone());
            if let Ok(g) = handle_grasp(&h, &table()) {
                let m = h.centroid().unwrap();
                prop_assert!((g.midpoint() - m).norm() < 1e-9);
                prop_assert!(pts.contains(&g.p1));
                prop_assert!(((g.p2 - g.p1).norm() - g.pair_distance).abs() < 1e-9);
                prop_assert!((g.approach_axis.norm() - 1.0).abs() < 1e-9);
            }
            let axis = Vector3::new(axis.0, axis.1, axis.2);
            prop_assume!(axis.norm() > 1e-3);
            let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
            let box_pts: Vec<_> = cuboid_grid([0.10, 0.04, 0.06], [10, 4, 6]).into_iter().map(|p| rot * p).collect();
            let obb = pca_obb(&box_pts).unwrap();
            let g = simple_grasp(&obb, &table());
            prop_assert!((g.midpoint() - obb.center).norm() < 1e-12);
            let k = obb.axes.iter().position(|a| (a.dot(&g.approach_axis).abs() - 1.0).abs() < 1e-9).unwrap();
            prop_assert!((g.pair_distance - 2.0 * obb.half_extents[k]).abs() < 1e-12);
        }
    }
}
