use std::time::Instant;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{handle_grasp, simple_grasp, GraspError, GraspMode, GraspPair};
use crate::cloud::{
    deproject_indexed, edge_mask, validity_filter, CameraIntrinsics, CategoryCode, CloudError,
    DepthFrame, PointCloud, Scores, DEFAULT_EDGE_MARGIN, DEFAULT_MAX_DEPTH, DEFAULT_MIN_DEPTH,
};
use crate::geometry::{
    convex_hull_on_plane, dbscan, pca_obb, points_in_prism, DbscanParams, ExtrusionParams,
    OrientedBoundingBox, Plane, Prism, RansacParams,
};
use crate::segmentation::{classify_mode, HandleExtractorParams, SceneMode};

/// Pixel-neighbourhood filter applied to in-prism points of organized
/// (frame-derived) clouds. A point survives when at least `min_neighbors`
/// other in-prism pixels of its `(2 radius + 1)²` window have a depth
/// within `max_depth_gap` of its own. `min_neighbors = 0` disables it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupportFilterParams {
    pub radius: usize,
    pub min_neighbors: usize,
    pub max_depth_gap: f64,
}

impl Default for SupportFilterParams {
    fn default() -> Self {
        Self {
            radius: 2,
            min_neighbors: 6,
            max_depth_gap: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub min_depth: f64,
    pub max_depth: f64,
    pub edge_margin: usize,
    pub ransac: RansacParams,
    /// RANSAC and the support hull run on an evenly strided subsample of at
    /// most this many points. 0 uses every point.
    pub plane_sample_limit: usize,
    pub extrusion: ExtrusionParams,
    pub support_filter: SupportFilterParams,
    pub dbscan: DbscanParams,
    pub handle: HandleExtractorParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            min_depth: DEFAULT_MIN_DEPTH,
            max_depth: DEFAULT_MAX_DEPTH,
            edge_margin: DEFAULT_EDGE_MARGIN,
            ransac: RansacParams::default(),
            plane_sample_limit: 20_000,
            extrusion: ExtrusionParams::default(),
            support_filter: SupportFilterParams::default(),
            dbscan: DbscanParams::default(),
            handle: HandleExtractorParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), GraspError> {
        let bad = |m: &str| Err(GraspError::InvalidConfig(m.to_string()));
        if !(self.min_depth >= 0.0 && self.max_depth > self.min_depth) {
            return bad("depth range must satisfy 0 <= min_depth < max_depth");
        }
        if !(self.ransac.threshold > 0.0) || self.ransac.max_iterations == 0 {
            return bad("ransac needs a positive threshold and at least one iteration");
        }
        if !(self.dbscan.eps > 0.0) || self.dbscan.min_pts == 0 {
            return bad("dbscan needs eps > 0 and min_pts >= 1");
        }
        if !(self.extrusion.floor_offset >= 0.0
            && self.extrusion.height > self.extrusion.floor_offset)
        {
            return bad("extrusion needs height > floor_offset >= 0");
        }
        self.handle
            .validate()
            .map_err(|e| GraspError::InvalidConfig(e.to_string()))
    }
}

/// Wall-clock time per pipeline stage, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub filter: f64,
    pub deproject: f64,
    pub plane: f64,
    pub prism: f64,
    pub cluster: f64,
    pub grasp: f64,
}

impl StageTimings {
    pub const NAMES: [&'static str; 6] =
        ["filter", "deproject", "plane", "prism", "cluster", "grasp"];

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.filter,
            self.deproject,
            self.plane,
            self.prism,
            self.cluster,
            self.grasp,
        ]
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: usize,
    pub mode: GraspMode,
    /// Member indices into the input cloud, ascending.
    pub indices: Vec<usize>,
    /// Subset of `indices` extracted as the handle; empty in simple mode.
    pub handle_indices: Vec<usize>,
    pub obb: OrientedBoundingBox,
    pub grasp: GraspPair,
}

/// Serialized form of [`SceneObjects`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub plane: Plane,
    pub objects: Vec<ObjectRecord>,
}

/// One JSON record per detected object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: usize,
    pub mode: GraspMode,
    pub p1: Point3<f64>,
    pub p2: Point3<f64>,
    pub pair_distance_m: f64,
    pub obb: OrientedBoundingBox,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObjects {
    pub plane: Plane,
    pub objects: Vec<SceneObject>,
}

/// PLY label given to appended grasp points.
pub const GRASP_POINT_LABEL: u8 = 3;

impl SceneObjects {
    /// Rebuilds a scene from its JSON records. Member indices are not part
    /// of the records and come back empty.
    pub fn from_records(plane: Plane, records: &[ObjectRecord]) -> Self {
        let objects = records
            .iter()
            .map(|r| {
                let delta = r.p2 - r.p1;
                SceneObject {
                    id: r.id,
                    mode: r.mode,
                    indices: Vec::new(),
                    handle_indices: Vec::new(),
                    obb: r.obb,
                    grasp: GraspPair {
                        p1: r.p1,
                        p2: r.p2,
                        approach_axis: delta / delta.norm(),
                        pair_distance: delta.norm(),
                        mode: r.mode,
                        object_id: r.id,
                    },
                }
            })
            .collect();
        Self { plane, objects }
    }

    pub fn records(&self) -> Vec<ObjectRecord> {
        self.objects
            .iter()
            .map(|o| ObjectRecord {
                id: o.id,
                mode: o.mode,
                p1: o.grasp.p1,
                p2: o.grasp.p2,
                pair_distance_m: o.grasp.pair_distance,
                obb: o.obb,
                points: o.indices.len(),
            })
            .collect()
    }

    pub fn report(&self) -> SceneReport {
        SceneReport {
            plane: self.plane,
            objects: self.records(),
        }
    }

    /// Predicted category per input point: handle members are Handle, other
    /// object members Body, everything else Background.
    pub fn point_labels(&self, n_points: usize) -> Vec<CategoryCode> {
        let mut labels = vec![CategoryCode::Background; n_points];
        for o in &self.objects {
            for &i in &o.indices {
                labels[i] = CategoryCode::Body;
            }
            for &i in &o.handle_indices {
                labels[i] = CategoryCode::Handle;
            }
        }
        labels
    }

    /// Input points labeled as in [`Self::point_labels`], followed by both
    /// grasp points of every object labeled [`GRASP_POINT_LABEL`].
    pub fn ply_dump(&self, points: &[Point3<f64>]) -> (Vec<Point3<f64>>, Vec<u8>) {
        let mut out = points.to_vec();
        let mut labels: Vec<u8> = self
            .point_labels(points.len())
            .into_iter()
            .map(|c| c as u8)
            .collect();
        for o in &self.objects {
            out.extend([o.grasp.p1, o.grasp.p2]);
            labels.extend([GRASP_POINT_LABEL; 2]);
        }
        (out, labels)
    }
}

/// Result of [`detect_frame`]. Object indices refer to `cloud`, whose
/// points came from the pixels listed in `pixels`.
#[derive(Debug, Clone)]
pub struct FrameDetection {
    pub cloud: PointCloud,
    pub pixels: Vec<u32>,
    pub scene: SceneObjects,
    pub timings: StageTimings,
}

struct Organized<'a> {
    pixels: &'a [u32],
    width: usize,
    height: usize,
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Full pipeline on a raw depth frame. `pixel_scores`, when given, holds one
/// row per pixel in row-major order.
pub fn detect_frame(
    frame: &DepthFrame,
    intr: &CameraIntrinsics,
    pixel_scores: Option<&Scores>,
    config: &PipelineConfig,
) -> Result<FrameDetection, GraspError> {
    config.validate()?;
    if let Some(s) = pixel_scores {
        if s.len() != frame.width() * frame.height() {
            return Err(CloudError::LengthMismatch {
                what: "pixel score matrix",
                expected: frame.width() * frame.height(),
                found: s.len(),
            }
            .into());
        }
    }
    let mut timings = StageTimings::default();

    let start = Instant::now();
    let filtered = validity_filter(frame, intr.depth_scale, config.min_depth, config.max_depth);
    let masked = edge_mask(&filtered, config.edge_margin)?;
    timings.filter = ms_since(start);

    let start = Instant::now();
    let (cloud, pixels) = deproject_indexed(&masked, intr)?;
    timings.deproject = ms_since(start);

    let organized = Organized {
        pixels: &pixels,
        width: frame.width(),
        height: frame.height(),
    };
    let rows: Option<Vec<usize>> =
        pixel_scores.map(|_| pixels.iter().map(|&p| p as usize).collect());
    let scores = pixel_scores.zip(rows.as_deref());
    let scene = run(
        cloud.points(),
        scores,
        Some(&organized),
        config,
        &mut timings,
    )?;
    Ok(FrameDetection {
        cloud,
        pixels,
        scene,
        timings,
    })
}

/// Pipeline on an already deprojected cloud. `scores` overrides the
/// cloud's own scores when given.
pub fn detect_scene(
    cloud: &PointCloud,
    scores: Option<&Scores>,
    config: &PipelineConfig,
) -> Result<SceneObjects, GraspError> {
    detect_scene_timed(cloud, scores, config).map(|(s, _)| s)
}

pub fn detect_scene_timed(
    cloud: &PointCloud,
    scores: Option<&Scores>,
    config: &PipelineConfig,
) -> Result<(SceneObjects, StageTimings), GraspError> {
    config.validate()?;
    let scores = scores.or(cloud.scores());
    if let Some(s) = scores {
        if s.len() != cloud.len() {
            return Err(CloudError::LengthMismatch {
                what: "score matrix",
                expected: cloud.len(),
                found: s.len(),
            }
            .into());
        }
    }
    let rows: Vec<usize>;
    let mapped = match scores {
        Some(s) => {
            rows = (0..cloud.len()).collect();
            Some((s, rows.as_slice()))
        }
        None => None,
    };
    let mut timings = StageTimings::default();
    let scene = run(cloud.points(), mapped, None, config, &mut timings)?;
    Ok((scene, timings))
}

fn support_plane(points: &[Point3<f64>], config: &PipelineConfig) -> Result<Prism, GraspError> {
    let limit = config.plane_sample_limit;
    let stride = if limit == 0 || points.len() <= limit {
        1
    } else {
        points.len().div_ceil(limit)
    };
    let sample: Vec<Point3<f64>> = points.iter().step_by(stride).copied().collect();
    let mut fit =
        crate::geometry::ransac_plane(&sample, &config.ransac).map_err(GraspError::NoPlaneFound)?;

    // A cloud whose origin sits on the plane gives no camera side to face;
    // orient toward the side holding more off-plane points instead.
    let thr = config.ransac.threshold;
    if fit.plane.d <= thr {
        let (mut above, mut below) = (0usize, 0usize);
        for p in &sample {
            let h = fit.plane.signed_distance(p);
            if h > thr {
                above += 1;
            } else if h < -thr {
                below += 1;
            }
        }
        if below > above {
            fit.plane = fit.plane.flipped();
        }
    }
    let hull = convex_hull_on_plane(&sample, &fit).map_err(GraspError::NoPlaneFound)?;
    Prism::new(hull, fit.plane, config.extrusion)
        .map_err(|e| GraspError::InvalidConfig(e.to_string()))
}

/// Keeps in-prism pixels with enough depth-consistent in-prism neighbours.
fn support_filter(
    inside: Vec<usize>,
    points: &[Point3<f64>],
    org: &Organized,
    params: &SupportFilterParams,
) -> Vec<usize> {
    if params.min_neighbors == 0 || inside.is_empty() {
        return inside;
    }
    let (w, h, r) = (org.width, org.height, params.radius);
    let mut depth = vec![f64::NAN; w * h];
    for &i in &inside {
        depth[org.pixels[i] as usize] = points[i].z;
    }
    inside
        .into_iter()
        .filter(|&i| {
            let p = org.pixels[i] as usize;
            let (u, v) = (p % w, p / w);
            let z = depth[p];
            let mut count = 0;
            for vv in v.saturating_sub(r)..(v + r + 1).min(h) {
                let row = &depth[vv * w..(vv + 1) * w];
                for &zz in &row[u.saturating_sub(r)..(u + r + 1).min(w)] {
                    // NaN (outside the prism) fails the comparison.
                    if (zz - z).abs() <= params.max_depth_gap {
                        count += 1;
                    }
                }
            }
            // The window includes the point itself.
            count > params.min_neighbors
        })
        .collect()
}

fn run(
    points: &[Point3<f64>],
    scores: Option<(&Scores, &[usize])>,
    organized: Option<&Organized>,
    config: &PipelineConfig,
    timings: &mut StageTimings,
) -> Result<SceneObjects, GraspError> {
    let start = Instant::now();
    let prism = support_plane(points, config)?;
    timings.plane = ms_since(start);

    let start = Instant::now();
    let mut inside = points_in_prism(points, &prism);
    if let Some(org) = organized {
        inside = support_filter(inside, points, org, &config.support_filter);
    }
    timings.prism = ms_since(start);
    if inside.is_empty() {
        return Err(GraspError::EmptyScene);
    }

    let start = Instant::now();
    let selected: Vec<Point3<f64>> = inside.iter().map(|&i| points[i]).collect();
    let clusters = dbscan(&selected, config.dbscan.eps, config.dbscan.min_pts).members();
    timings.cluster = ms_since(start);

    let start = Instant::now();
    let plane = *prism.plane();
    let mut objects = Vec::with_capacity(clusters.len());
    for members in clusters {
        let indices: Vec<usize> = members.iter().map(|&k| inside[k]).collect();
        let member_points: Vec<Point3<f64>> = members.iter().map(|&k| selected[k]).collect();
        let Ok(obb) = pca_obb(&member_points) else {
            continue;
        };
        let id = objects.len();
        let mode = match scores {
            Some((s, rows)) => {
                let sub = Scores::new(indices.iter().map(|&i| s.rows()[rows[i]]).collect());
                let cloud = PointCloud::new(member_points.clone())?;
                classify_mode(&cloud, Some(&sub), &config.handle)
            }
            None => SceneMode::Simple,
        };
        let (grasp, handle_indices) = match mode {
            SceneMode::Complex(handle) => match handle_grasp(&handle, &plane) {
                Ok(g) => (
                    g,
                    handle.source_indices.iter().map(|&k| indices[k]).collect(),
                ),
                Err(_) => (simple_grasp(&obb, &plane), Vec::new()),
            },
            SceneMode::Simple => (simple_grasp(&obb, &plane), Vec::new()),
        };
        objects.push(SceneObject {
            id,
            mode: grasp.mode,
            indices,
            handle_indices,
            obb,
            grasp: grasp.with_id(id),
        });
    }
    timings.grasp = ms_since(start);
    if objects.is_empty() {
        return Err(GraspError::EmptyScene);
    }
    Ok(SceneObjects { plane, objects })
}
