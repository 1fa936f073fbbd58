//! Depth frame ingestion and metric point clouds.
//!
//! Frames are row-major `u16` depth images where `0` marks an invalid pixel.
//! Deprojection follows the usual RGB-D camera convention: +X right, +Y down,
//! +Z along the optical axis, all in meters.

pub mod io;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validity range applied to metric depth when none is configured.
pub const DEFAULT_MIN_DEPTH: f64 = 0.15;
pub const DEFAULT_MAX_DEPTH: f64 = 4.0;
/// Border width masked off every frame, in pixels.
pub const DEFAULT_EDGE_MARGIN: usize = 20;
/// Millimeter depth units.
pub const DEFAULT_DEPTH_SCALE: f64 = 0.001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("depth buffer holds {found} values, frame needs {expected}")]
    FrameLength { expected: usize, found: usize },
    #[error("edge margin {margin} too large for a {width}x{height} frame")]
    MarginTooLarge {
        margin: usize,
        width: usize,
        height: usize,
    },
    #[error(
        "frame is {frame_width}x{frame_height} but intrinsics describe {intr_width}x{intr_height}"
    )]
    DimensionMismatch {
        frame_width: usize,
        frame_height: usize,
        intr_width: usize,
        intr_height: usize,
    },
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("{what} has {found} entries, cloud has {expected} points")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

/// Pinhole camera model plus the depth unit of the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Meters per stored depth unit.
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        depth_scale: f64,
    ) -> Result<Self, CloudError> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            depth_scale,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// Centered principal point, square pixels, millimeter depth.
    pub fn centered(width: usize, height: usize, focal: f64) -> Result<Self, CloudError> {
        Self::new(
            focal,
            focal,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
            DEFAULT_DEPTH_SCALE,
        )
    }

    pub fn validate(&self) -> Result<(), CloudError> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(CloudError::InvalidIntrinsics(
                "focal lengths must be positive",
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CloudError::InvalidIntrinsics("frame size must be nonzero"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(CloudError::InvalidIntrinsics("cx must lie in [0, width)"));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(CloudError::InvalidIntrinsics("cy must lie in [0, height)"));
        }
        if !(self.depth_scale > 0.0) || !self.depth_scale.is_finite() {
            return Err(CloudError::InvalidIntrinsics(
                "depth_scale must be positive",
            ));
        }
        Ok(())
    }

    /// Pixel coordinates of a camera-frame point. `None` behind the camera.
    pub fn project(&self, p: &Point3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }
}

/// Raw sensor depth image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthFrame {
    width: usize,
    height: usize,
    depth: Vec<u16>,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, depth: Vec<u16>) -> Result<Self, CloudError> {
        if depth.len() != width * height {
            return Err(CloudError::FrameLength {
                expected: width * height,
                found: depth.len(),
            });
        }
        Ok(Self {
            width,
            height,
            depth,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u16] {
        &self.depth
    }

    pub fn data_mut(&mut self) -> &mut [u16] {
        &mut self.depth
    }

    pub fn into_data(self) -> Vec<u16> {
        self.depth
    }

    pub fn get(&self, u: usize, v: usize) -> u16 {
        self.depth[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, raw: u16) {
        self.depth[v * self.width + u] = raw;
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|&&d| d != 0).count()
    }
}

/// Per-point semantic category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum CategoryCode {
    Background = 0,
    Body = 1,
    Handle = 2,
}

impl CategoryCode {
    pub const ALL: [CategoryCode; 3] = [Self::Background, Self::Body, Self::Handle];

    pub fn name(self) -> &'static str {
        match self {
            Self::Background => "background",
            Self::Body => "body",
            Self::Handle => "handle",
        }
    }
}

impl TryFrom<u8> for CategoryCode {
    type Error = u8;

    fn try_from(code: u8) -> Result<Self, u8> {
        match code {
            0 => Ok(Self::Background),
            1 => Ok(Self::Body),
            2 => Ok(Self::Handle),
            other => Err(other),
        }
    }
}

/// N x 3 matrix of per-point category scores in (Background, Body, Handle)
/// order. Rows need not be normalized.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scores(Vec<[f64; 3]>);

impl Scores {
    pub fn new(rows: Vec<[f64; 3]>) -> Self {
        Self(rows)
    }

    pub fn one_hot(labels: &[CategoryCode]) -> Self {
        Self(
            labels
                .iter()
                .map(|&c| {
                    let mut row = [0.0; 3];
                    row[c as usize] = 1.0;
                    row
                })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Highest-scoring category of row `i`; ties go to the lower code.
    pub fn argmax(&self, i: usize) -> CategoryCode {
        argmax_row(&self.0[i])
    }

    pub fn argmax_all(&self) -> Vec<CategoryCode> {
        self.0.iter().map(argmax_row).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self(indices.iter().map(|&i| self.0[i]).collect())
    }
}

fn argmax_row(row: &[f64; 3]) -> CategoryCode {
    let mut best = 0;
    for k in 1..3 {
        if row[k] > row[best] {
            best = k;
        }
    }
    CategoryCode::ALL[best]
}

/// Metric 3D points with optional per-point labels and scores.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    labels: Option<Vec<CategoryCode>>,
    scores: Option<Scores>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self, CloudError> {
        if let Some(index) = points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(CloudError::NonFinitePoint { index });
        }
        Ok(Self {
            points,
            labels: None,
            scores: None,
        })
    }

    pub fn from_xyz(xyz: &[[f64; 3]]) -> Result<Self, CloudError> {
        Self::new(xyz.iter().map(|&[x, y, z]| Point3::new(x, y, z)).collect())
    }

    pub fn with_labels(mut self, labels: Vec<CategoryCode>) -> Result<Self, CloudError> {
        if labels.len() != self.points.len() {
            return Err(CloudError::LengthMismatch {
                what: "label array",
                expected: self.points.len(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_scores(mut self, scores: Scores) -> Result<Self, CloudError> {
        if scores.len() != self.points.len() {
            return Err(CloudError::LengthMismatch {
                what: "score matrix",
                expected: self.points.len(),
                found: scores.len(),
            });
        }
        self.scores = Some(scores);
        Ok(self)
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[CategoryCode]> {
        self.labels.as_deref()
    }

    pub fn scores(&self) -> Option<&Scores> {
        self.scores.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points at `indices`, carrying labels and scores along.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            scores: self.scores.as_ref().map(|s| s.subset(indices)),
        }
    }
}

/// Zeroes pixels whose metric depth lies outside `[min_depth, max_depth]`.
/// Raw zeros stay zero.
pub fn validity_filter(
    frame: &DepthFrame,
    depth_scale: f64,
    min_depth: f64,
    max_depth: f64,
) -> DepthFrame {
    let mut out = frame.clone();
    for raw in out.depth.iter_mut() {
        let z = f64::from(*raw) * depth_scale;
        if *raw == 0 || z < min_depth || z > max_depth {
            *raw = 0;
        }
    }
    out
}

/// Zeroes a `margin`-pixel band along every border.
pub fn edge_mask(frame: &DepthFrame, margin: usize) -> Result<DepthFrame, CloudError> {
    let (w, h) = (frame.width, frame.height);
    if 2 * margin >= w.min(h) {
        return Err(CloudError::MarginTooLarge {
            margin,
            width: w,
            height: h,
        });
    }
    let mut out = frame.clone();
    if margin == 0 {
        return Ok(out);
    }
    for (v, row) in out.depth.chunks_mut(w).enumerate() {
        if v < margin || v >= h - margin {
            row.fill(0);
        } else {
            row[..margin].fill(0);
            row[w - margin..].fill(0);
        }
    }
    Ok(out)
}

/// Converts every valid pixel to a camera-frame point, in row-major order.
pub fn deproject(frame: &DepthFrame, intr: &CameraIntrinsics) -> Result<PointCloud, CloudError> {
    deproject_indexed(frame, intr).map(|(cloud, _)| cloud)
}

/// Like [`deproject`], also returning the linear pixel index of each point.
pub fn deproject_indexed(
    frame: &DepthFrame,
    intr: &CameraIntrinsics,
) -> Result<(PointCloud, Vec<u32>), CloudError> {
    if frame.width != intr.width || frame.height != intr.height {
        return Err(CloudError::DimensionMismatch {
            frame_width: frame.width,
            frame_height: frame.height,
            intr_width: intr.width,
            intr_height: intr.height,
        });
    }
    let (w, h) = (frame.width, frame.height);
    let x_factor: Vec<f64> = (0..w).map(|u| (u as f64 - intr.cx) / intr.fx).collect();
    let mut points = Vec::with_capacity(frame.valid_count());
    let mut pixels = Vec::with_capacity(points.capacity());
    for v in 0..h {
        let y_factor = (v as f64 - intr.cy) / intr.fy;
        let row = &frame.depth[v * w..(v + 1) * w];
        for (u, &raw) in row.iter().enumerate() {
            if raw == 0 {
                continue;
            }
            let z = f64::from(raw) * intr.depth_scale;
            points.push(Point3::new(x_factor[u] * z, y_factor * z, z));
            pixels.push((v * w + u) as u32);
        }
    }
    Ok((
        PointCloud {
            points,
            labels: None,
            scores: None,
        },
        pixels,
    ))
}

/// Renders points into a depth frame, keeping the nearest point per pixel.
/// Points behind the camera or outside the frame are dropped.
pub fn project(points: &[Point3<f64>], intr: &CameraIntrinsics) -> DepthFrame {
    let mut frame = DepthFrame::zeros(intr.width, intr.height);
    for p in points {
        let Some((u, v)) = intr.project(p) else {
            continue;
        };
        let (u, v) = (u.round(), v.round());
        if u < 0.0 || v < 0.0 || u >= intr.width as f64 || v >= intr.height as f64 {
            continue;
        }
        let raw = (p.z / intr.depth_scale).round();
        if !(1.0..=f64::from(u16::MAX)).contains(&raw) {
            continue;
        }
        let raw = raw as u16;
        let slot = &mut frame.depth[v as usize * intr.width + u as usize];
        if *slot == 0 || raw < *slot {
            *slot = raw;
        }
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn intr(w: usize, h: usize) -> CameraIntrinsics {
        CameraIntrinsics::new(600.0, 600.0, w as f64 / 2.0, h as f64 / 2.0, w, h, 0.001).unwrap()
    }

    #[test]
    fn intrinsics_reject_bad_values() {
        assert!(CameraIntrinsics::new(0.0, 600.0, 1.0, 1.0, 4, 4, 0.001).is_err());
        assert!(CameraIntrinsics::new(600.0, 600.0, 4.0, 1.0, 4, 4, 0.001).is_err());
        assert!(CameraIntrinsics::new(600.0, 600.0, 1.0, 1.0, 4, 4, 0.0).is_err());
        assert!(CameraIntrinsics::new(600.0, 600.0, 0.0, 0.0, 4, 4, 0.001).is_ok());
    }

    #[test]
    fn frame_length_is_checked() {
        assert_eq!(
            DepthFrame::new(3, 2, vec![0; 5]),
            Err(CloudError::FrameLength {
                expected: 6,
                found: 5
            })
        );
    }

    #[test]
    fn validity_filter_on_zeros_is_identity() {
        let f = DepthFrame::zeros(8, 6);
        assert_eq!(validity_filter(&f, 0.001, 0.15, 4.0), f);
    }

    #[test]
    fn validity_filter_clamps_far_pixels() {
        let f = DepthFrame::new(2, 1, vec![6000, 1000]).unwrap();
        let out = validity_filter(&f, 0.001, 0.15, 4.0);
        assert_eq!(out.data(), &[0, 1000]);
        let near = DepthFrame::new(1, 1, vec![100]).unwrap();
        assert_eq!(validity_filter(&near, 0.001, 0.15, 4.0).data(), &[0]);
    }

    #[test]
    fn validity_filter_zeroes_exactly_the_saturated_pixels() {
        let (w, h) = (800, 600);
        let mut depth = vec![0u16; w * h];
        let mut x: u64 = 0x9e37_79b9_7f4a_7c15;
        for d in depth.iter_mut() {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            *d = 300 + (x % 3000) as u16;
        }
        for i in (0..w * h).step_by(100) {
            depth[i] = u16::MAX;
        }
        let frame = DepthFrame::new(w, h, depth).unwrap();
        let saturated = frame.data().iter().filter(|&&d| d == u16::MAX).count();
        assert_eq!(saturated, 4800);
        let out = validity_filter(&frame, 0.001, 0.15, 4.0);
        assert_eq!(w * h - out.valid_count(), saturated);
        for (a, b) in frame.data().iter().zip(out.data()) {
            if *a == u16::MAX {
                assert_eq!(*b, 0);
            } else {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn edge_mask_counts() {
        let f = DepthFrame::new(10, 10, vec![500; 100]).unwrap();
        assert_eq!(edge_mask(&f, 0).unwrap(), f);
        let m = edge_mask(&f, 2).unwrap();
        assert_eq!(m.valid_count(), 36);
        for v in 2..8 {
            for u in 2..8 {
                assert_eq!(m.get(u, v), 500);
            }
        }
        let big = DepthFrame::new(800, 600, vec![500; 480_000]).unwrap();
        assert_eq!(edge_mask(&big, 20).unwrap().valid_count(), 425_600);
    }

    #[test]
    fn edge_mask_rejects_oversized_margin() {
        let f = DepthFrame::zeros(10, 8);
        assert!(matches!(
            edge_mask(&f, 4),
            Err(CloudError::MarginTooLarge { .. })
        ));
        assert!(edge_mask(&f, 3).is_ok());
    }

    #[test]
    fn deproject_principal_ray_and_unit_offset() {
        let k = CameraIntrinsics::new(600.0, 600.0, 100.0, 50.0, 800, 100, 0.001).unwrap();
        let mut f = DepthFrame::zeros(800, 100);
        f.set(100, 50, 1000);
        f.set(700, 50, 1000);
        let cloud = deproject(&f, &k).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.points()[0], Point3::new(0.0, 0.0, 1.0));
        assert_eq!(cloud.points()[1], Point3::new(1.0, 0.0, 1.0));
    }

    #[test]
    fn deproject_checks_dimensions() {
        let f = DepthFrame::zeros(10, 10);
        assert!(matches!(
            deproject(&f, &intr(12, 10)),
            Err(CloudError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn deproject_flat_plane_recovers_depth() {
        let k = intr(64, 48);
        let f = DepthFrame::new(64, 48, vec![500; 64 * 48]).unwrap();
        let cloud = deproject(&f, &k).unwrap();
        assert_eq!(cloud.len(), 64 * 48);
        assert!(cloud.points().iter().all(|p| (p.z - 0.5).abs() < 1e-6));
    }

    #[test]
    fn scores_argmax_ties_go_low() {
        let s = Scores::new(vec![[0.1, 0.2, 0.7], [0.5, 0.5, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(
            s.argmax_all(),
            vec![
                CategoryCode::Handle,
                CategoryCode::Background,
                CategoryCode::Background
            ]
        );
    }

    #[test]
    fn cloud_rejects_non_finite_and_bad_sidecars() {
        assert_eq!(
            PointCloud::from_xyz(&[[0.0, f64::NAN, 1.0]]),
            Err(CloudError::NonFinitePoint { index: 0 })
        );
        let c = PointCloud::from_xyz(&[[0.0, 0.0, 1.0]]).unwrap();
        assert!(c.clone().with_labels(vec![]).is_err());
        assert!(c.with_scores(Scores::new(vec![[0.0; 3]; 2])).is_err());
    }

    proptest! {
        #[test]
        fn reprojection_round_trip(
            pixels in proptest::collection::btree_set((0usize..64, 0usize..48), 1..60),
            depth_mm in 200u16..3000,
        ) {
            let k = intr(64, 48);
            let pts: Vec<Point3<f64>> = pixels
                .iter()
                .map(|&(u, v)| {
                    let z = f64::from(depth_mm) * 0.001;
                    Point3::new((u as f64 - k.cx) * z / k.fx, (v as f64 - k.cy) * z / k.fy, z)
                })
                .collect();
            let frame = project(&pts, &k);
            let cloud = deproject(&frame, &k).unwrap();
            prop_assert_eq!(cloud.len(), pts.len());
            // btree order over (u, v) differs from row-major, so match by pixel
            for p in cloud.points() {
                prop_assert!(pts.iter().any(|q| (p - q).norm() < 1e-6));
            }
        }

        #[test]
        fn mask_and_filter_commute(
            data in proptest::collection::vec(0u16..6000, 20 * 16),
            margin in 0usize..8,
        ) {
            let f = DepthFrame::new(20, 16, data).unwrap();
            let a = edge_mask(&validity_filter(&f, 0.001, 0.15, 4.0), margin).unwrap();
            let b = validity_filter(&edge_mask(&f, margin).unwrap(), 0.001, 0.15, 4.0);
            prop_assert_eq!(&a, &b);
            let k = intr(20, 16);
            prop_assert_eq!(deproject(&a, &k).unwrap().len(), a.valid_count());
        }
    }
}
