//! Ray-cast depth rendering of primitive objects on a table.
//!
//! World frame: the table is the plane `z = 0`, `+z` up. The camera looks
//! down at the table from `height` meters, optionally pitched by `tilt_deg`
//! about its own x axis.

use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{CameraIntrinsics, CategoryCode, DepthFrame, DEFAULT_DEPTH_SCALE};
use crate::grasp::GraspMode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
}

/// Object geometry in its local frame: footprint centered on the origin,
/// resting on `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `length` along local x, `width` along local y.
    Cuboid {
        length: f64,
        width: f64,
        height: f64,
    },
    Sphere {
        radius: f64,
    },
    /// Upright (axis along z) or lying with its axis along local x.
    Cylinder {
        radius: f64,
        length: f64,
        lying: bool,
    },
    /// Upright cylindrical body with a flat bar handle along local +x whose
    /// top is flush with the body top.
    Handled {
        body_radius: f64,
        body_height: f64,
        handle_length: f64,
        handle_width: f64,
        handle_thickness: f64,
    },
}

impl Shape {
    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Cuboid { .. } => "cuboid",
            Shape::Sphere { .. } => "sphere",
            Shape::Cylinder { lying: false, .. } => "cylinder",
            Shape::Cylinder { lying: true, .. } => "lying_cylinder",
            Shape::Handled { .. } => "handled",
        }
    }

    /// Analytic grasp-pair distance.
    pub fn true_pair_distance(&self) -> f64 {
        match *self {
            Shape::Cuboid { length, width, .. } => length.min(width),
            Shape::Sphere { radius } => 2.0 * radius,
            Shape::Cylinder { radius, .. } => 2.0 * radius,
            Shape::Handled { handle_width, .. } => handle_width,
        }
    }

    pub fn expected_mode(&self) -> GraspMode {
        match self {
            Shape::Handled { .. } => GraspMode::Complex,
            _ => GraspMode::Simple,
        }
    }

    fn dims(&self) -> Vec<f64> {
        match *self {
            Shape::Cuboid {
                length,
                width,
                height,
            } => vec![length, width, height],
            Shape::Sphere { radius } => vec![radius],
            Shape::Cylinder { radius, length, .. } => vec![radius, length],
            Shape::Handled {
                body_radius,
                body_height,
                handle_length,
                handle_width,
                handle_thickness,
            } => vec![
                body_radius,
                body_height,
                handle_length,
                handle_width,
                handle_thickness,
            ],
        }
    }

    /// Local point the grasp pair should be centered on, used to match
    /// detections to objects.
    fn reference_center(&self) -> Point3<f64> {
        match *self {
            Shape::Cuboid { height, .. } => Point3::new(0.0, 0.0, height / 2.0),
            Shape::Sphere { radius } => Point3::new(0.0, 0.0, radius),
            Shape::Cylinder {
                radius,
                length,
                lying,
            } => Point3::new(0.0, 0.0, if lying { radius } else { length / 2.0 }),
            Shape::Handled {
                body_radius,
                body_height,
                handle_length,
                handle_thickness,
                ..
            } => Point3::new(
                body_radius + handle_length / 2.0,
                0.0,
                body_height - handle_thickness / 2.0,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    /// Footprint center on the table, meters.
    pub position: [f64; 2],
    /// Rotation about the table normal, degrees.
    #[serde(default)]
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraSpec {
    /// Camera center above the table, meters.
    pub height: f64,
    /// Camera center's table coordinates.
    pub position: [f64; 2],
    /// Pitch about the camera x axis, degrees. Positive looks toward +y.
    pub tilt_deg: f64,
    pub width: usize,
    pub height_px: usize,
    pub focal: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            height: 0.5,
            position: [0.0, 0.0],
            tilt_deg: 0.0,
            width: 800,
            height_px: 600,
            focal: DEFAULT_FOCAL,
        }
    }
}

/// Focal length in pixels of the default synthetic camera.
pub const DEFAULT_FOCAL: f64 = 1000.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Per-pixel Gaussian depth noise, meters.
    pub depth_sigma: f64,
    /// Fraction of pixels replaced by a uniformly random depth.
    pub outlier_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default)]
    pub noise: NoiseModel,
    /// Table half size along world x and y; rays missing it return no depth.
    #[serde(default = "default_table")]
    pub table_half_size: [f64; 2],
    #[serde(default)]
    pub seed: u64,
}

fn default_table() -> [f64; 2] {
    [2.0, 2.0]
}

impl SceneSpec {
    pub fn single(shape: Shape) -> Self {
        Self {
            objects: vec![ObjectSpec {
                shape,
                position: [0.0, 0.0],
                yaw_deg: 0.0,
            }],
            camera: CameraSpec::default(),
            noise: NoiseModel::default(),
            table_half_size: default_table(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        for (i, o) in self.objects.iter().enumerate() {
            if o.shape.dims().iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                return bad(format!("object {i}: dimensions must be positive"));
            }
            if let Shape::Handled {
                body_height,
                handle_thickness,
                ..
            } = o.shape
            {
                if handle_thickness > body_height {
                    return bad(format!("object {i}: handle thicker than body height"));
                }
            }
            if !(o.position.iter().all(|v| v.is_finite()) && o.yaw_deg.is_finite()) {
                return bad(format!("object {i}: pose must be finite"));
            }
        }
        let c = &self.camera;
        if !(c.height > 0.0 && c.height.is_finite()) {
            return bad("camera height must be positive".into());
        }
        if !(c.tilt_deg.abs() < 80.0) {
            return bad("camera tilt must be within 80 degrees".into());
        }
        if c.width == 0 || c.height_px == 0 || !(c.focal > 0.0) {
            return bad("camera resolution and focal must be positive".into());
        }
        let n = &self.noise;
        if !(n.depth_sigma >= 0.0) || !(0.0..=1.0).contains(&n.outlier_fraction) {
            return bad("noise sigma must be >= 0 and outlier fraction in [0, 1]".into());
        }
        if !(self.table_half_size.iter().all(|h| *h > 0.0)) {
            return bad("table half size must be positive".into());
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        let c = &self.camera;
        CameraIntrinsics {
            width: c.width,
            height: c.height_px,
            fx: c.focal,
            fy: c.focal,
            cx: (c.width as f64 - 1.0) / 2.0,
            cy: (c.height_px as f64 - 1.0) / 2.0,
            depth_scale: DEFAULT_DEPTH_SCALE,
        }
    }

    /// Camera pose as `(center, rotation)` with `rotation` mapping camera to
    /// world coordinates.
    pub fn camera_pose(&self) -> (Point3<f64>, Matrix3<f64>) {
        let c = &self.camera;
        let (s, co) = c.tilt_deg.to_radians().sin_cos();
        let x = Vector3::x();
        let y0 = -Vector3::y();
        let z0 = -Vector3::z();
        let y = y0 * co + z0 * s;
        let z = z0 * co - y0 * s;
        (
            Point3::new(c.position[0], c.position[1], c.height),
            Matrix3::from_columns(&[x, y, z]),
        )
    }

    pub fn world_to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        let (center, rot) = self.camera_pose();
        Point3::from(rot.transpose() * (p - center))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTruth {
    pub index: usize,
    pub kind: String,
    pub pair_distance: f64,
    pub mode: GraspMode,
    /// Expected grasp-pair midpoint region, camera frame.
    pub reference_center: Point3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub objects: Vec<ObjectTruth>,
    /// Table plane `normal · p + d = 0` in the camera frame.
    pub plane_normal: Vector3<f64>,
    pub plane_d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub frame: DepthFrame,
    pub intrinsics: CameraIntrinsics,
    /// Ground-truth category per pixel, row-major.
    pub labels: Vec<CategoryCode>,
    /// Object index per pixel (`None` for table, outliers and misses).
    pub object_ids: Vec<Option<usize>>,
    pub truth: SceneTruth,
}

struct Hit {
    t: f64,
    label: CategoryCode,
}

fn nearest(a: Option<Hit>, b: Option<Hit>) -> Option<Hit> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.t < a.t { b } else { a }),
        (a, b) => a.or(b),
    }
}

/// Entry parameter of a ray into an axis-aligned box (slab method).
fn ray_box(o: &Vector3<f64>, d: &Vector3<f64>, lo: [f64; 3], hi: [f64; 3]) -> Option<f64> {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for k in 0..3 {
        if d[k].abs() < 1e-15 {
            if o[k] < lo[k] || o[k] > hi[k] {
                return None;
            }
            continue;
        }
        let (a, b) = ((lo[k] - o[k]) / d[k], (hi[k] - o[k]) / d[k]);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
        if t0 > t1 {
            return None;
        }
    }
    (t0 > 0.0).then_some(t0)
}

/// Positive roots of `a t² + 2 b t + c = 0`, smaller first.
fn quadratic_hits(a: f64, b: f64, c: f64) -> [Option<f64>; 2] {
    if a.abs() < 1e-18 {
        return [None, None];
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return [None, None];
    }
    let s = disc.sqrt();
    let roots = [(-b - s) / a, (-b + s) / a];
    roots.map(|t| (t > 0.0).then_some(t))
}

/// Solid cylinder with axis `axis` (0 = x, 2 = z) through `base`, spanning
/// `[lo, hi]` along that axis.
fn ray_cylinder(
    o: &Vector3<f64>,
    d: &Vector3<f64>,
    axis: usize,
    center: [f64; 2],
    radius: f64,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    let (i, j) = if axis == 2 { (0, 1) } else { (1, 2) };
    let (ox, oy) = (o[i] - center[0], o[j] - center[1]);
    let (dx, dy) = (d[i], d[j]);
    let mut best: Option<f64> = None;
    let mut take = |t: f64| {
        if best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    for t in quadratic_hits(
        dx * dx + dy * dy,
        ox * dx + oy * dy,
        ox * ox + oy * oy - radius * radius,
    )
    .into_iter()
    .flatten()
    {
        let s = o[axis] + t * d[axis];
        if (lo..=hi).contains(&s) {
            take(t);
        }
    }
    if d[axis].abs() > 1e-15 {
        for cap in [lo, hi] {
            let t = (cap - o[axis]) / d[axis];
            if t > 0.0 {
                let (x, y) = (ox + t * dx, oy + t * dy);
                if x * x + y * y <= radius * radius {
                    take(t);
                }
            }
        }
    }
    best
}

fn ray_shape(shape: &Shape, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
    let body = |t: Option<f64>| {
        t.map(|t| Hit {
            t,
            label: CategoryCode::Body,
        })
    };
    match *shape {
        Shape::Cuboid {
            length,
            width,
            height,
        } => body(ray_box(
            o,
            d,
            [-length / 2.0, -width / 2.0, 0.0],
            [length / 2.0, width / 2.0, height],
        )),
        Shape::Sphere { radius } => {
            let oc = o - Vector3::new(0.0, 0.0, radius);
            let [a, _] = quadratic_hits(
                d.norm_squared(),
                oc.dot(d),
                oc.norm_squared() - radius * radius,
            );
            body(a)
        }
        Shape::Cylinder {
            radius,
            length,
            lying,
        } => body(if lying {
            ray_cylinder(o, d, 0, [0.0, radius], radius, -length / 2.0, length / 2.0)
        } else {
            ray_cylinder(o, d, 2, [0.0, 0.0], radius, 0.0, length)
        }),
        Shape::Handled {
            body_radius,
            body_height,
            handle_length,
            handle_width,
            handle_thickness,
        } => {
            let b = body(ray_cylinder(
                o,
                d,
                2,
                [0.0, 0.0],
                body_radius,
                0.0,
                body_height,
            ));
            let h = ray_box(
                o,
                d,
                [
                    0.5 * body_radius,
                    -handle_width / 2.0,
                    body_height - handle_thickness,
                ],
                [body_radius + handle_length, handle_width / 2.0, body_height],
            )
            .map(|t| Hit {
                t,
                label: CategoryCode::Handle,
            });
            // On exact ties the body wins, so the flush top inside the body
            // footprint stays Body.
            nearest(b, h)
        }
    }
}

/// Renders the scene. Deterministic in `spec.seed`.
pub fn synth_scene(spec: &SceneSpec) -> Result<SyntheticFrame, SynthError> {
    spec.validate()?;
    let intr = spec.intrinsics();
    let (center, rot) = spec.camera_pose();
    let (w, h) = (intr.width, intr.height);

    let locals: Vec<(Matrix3<f64>, Vector3<f64>)> = spec
        .objects
        .iter()
        .map(|o| {
            let (s, c) = o.yaw_deg.to_radians().sin_cos();
            let to_local = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
            let origin =
                to_local * (center.coords - Vector3::new(o.position[0], o.position[1], 0.0));
            (to_local, origin)
        })
        .collect();

    let mut depth = vec![0.0f64; w * h];
    let mut labels = vec![CategoryCode::Background; w * h];
    let mut object_ids = vec![None; w * h];
    for v in 0..h {
        for u in 0..w {
            let dc = Vector3::new(
                (u as f64 - intr.cx) / intr.fx,
                (v as f64 - intr.cy) / intr.fy,
                1.0,
            );
            let dw = rot * dc;
            // Camera-frame z of `dc` is 1, so the ray parameter is the depth.
            let mut best: Option<(Hit, Option<usize>)> = None;
            if dw.z < 0.0 {
                let t = -center.z / dw.z;
                let p = center + dw * t;
                if p.x.abs() <= spec.table_half_size[0] && p.y.abs() <= spec.table_half_size[1] {
                    best = Some((
                        Hit {
                            t,
                            label: CategoryCode::Background,
                        },
                        None,
                    ));
                }
            }
            for (k, o) in spec.objects.iter().enumerate() {
                let (to_local, origin) = &locals[k];
                if let Some(hit) = ray_shape(&o.shape, origin, &(to_local * dw)) {
                    if best.as_ref().is_none_or(|(b, _)| hit.t < b.t) {
                        best = Some((hit, Some(k)));
                    }
                }
            }
            if let Some((hit, id)) = best {
                let i = v * w + u;
                depth[i] = hit.t;
                labels[i] = hit.label;
                object_ids[i] = id;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise.depth_sigma.max(0.0)).expect("finite sigma");
    let far = depth
        .iter()
        .copied()
        .fold(0.0f64, f64::max)
        .max(spec.camera.height)
        * 1.2;
    let mut raw = vec![0u16; w * h];
    for i in 0..w * h {
        let outlier =
            spec.noise.outlier_fraction > 0.0 && rng.random::<f64>() < spec.noise.outlier_fraction;
        let z = if outlier {
            labels[i] = CategoryCode::Background;
            object_ids[i] = None;
            rng.random_range(0.2..far)
        } else if depth[i] > 0.0 {
            let z = depth[i];
            if spec.noise.depth_sigma > 0.0 {
                z + noise.sample(&mut rng)
            } else {
                z
            }
        } else {
            continue;
        };
        let q = (z / intr.depth_scale).round();
        raw[i] = q.clamp(0.0, f64::from(u16::MAX)) as u16;
        if raw[i] == 0 {
            labels[i] = CategoryCode::Background;
            object_ids[i] = None;
        }
    }

    let objects = spec
        .objects
        .iter()
        .enumerate()
        .map(|(index, o)| {
            let (s, c) = o.yaw_deg.to_radians().sin_cos();
            let r = o.shape.reference_center();
            let world = Point3::new(
                o.position[0] + c * r.x - s * r.y,
                o.position[1] + s * r.x + c * r.y,
                r.z,
            );
            ObjectTruth {
                index,
                kind: o.shape.kind().to_string(),
                pair_distance: o.shape.true_pair_distance(),
                mode: o.shape.expected_mode(),
                reference_center: spec.world_to_camera(&world),
            }
        })
        .collect();
    let normal = rot.transpose() * Vector3::z();
    let plane_d = -normal.dot(&spec.world_to_camera(&Point3::origin()).coords);

    Ok(SyntheticFrame {
        frame: DepthFrame::new(w, h, raw).expect("buffer sized to frame"),
        intrinsics: intr,
        labels,
        object_ids,
        truth: SceneTruth {
            objects,
            plane_normal: normal,
            plane_d,
        },
    })
}
