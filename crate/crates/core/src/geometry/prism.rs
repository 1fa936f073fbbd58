use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};

use super::{ConvexPolygon2D, GeometryError, Plane};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtrusionParams {
    /// Extrusion height above the support plane, meters.
    pub height: f64,
    /// Slab just above the plane that is excluded, meters.
    pub floor_offset: f64,
}

impl Default for ExtrusionParams {
    fn default() -> Self {
        Self {
            height: 0.40,
            floor_offset: 0.005,
        }
    }
}

/// Support hull swept along the plane normal toward the camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prism {
    base: ConvexPolygon2D,
    plane: Plane,
    height: f64,
    floor_offset: f64,
}

impl Prism {
    pub fn new(
        base: ConvexPolygon2D,
        plane: Plane,
        extrusion: ExtrusionParams,
    ) -> Result<Self, GeometryError> {
        if !(extrusion.floor_offset >= 0.0 && extrusion.height > extrusion.floor_offset) {
            return Err(GeometryError::InvalidParameter(
                "prism needs height > floor_offset >= 0",
            ));
        }
        Ok(Self {
            base,
            plane,
            height: extrusion.height,
            floor_offset: extrusion.floor_offset,
        })
    }

    pub fn base(&self) -> &ConvexPolygon2D {
        &self.base
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn floor_offset(&self) -> f64 {
        self.floor_offset
    }
}

/// Indices of points with height in `(floor_offset, height]` whose
/// projection falls inside the base polygon (boundary inclusive).
pub fn points_in_prism(points: &[Point3<f64>], prism: &Prism) -> Vec<usize> {
    let (u, v) = prism.plane.basis();
    let n = prism.plane.normal;
    let d = prism.plane.d;
    let verts = prism.base.vertices();
    let (mut lo, mut hi) = (verts[0], verts[0]);
    for q in verts {
        lo = Point2::new(lo.x.min(q.x), lo.y.min(q.y));
        hi = Point2::new(hi.x.max(q.x), hi.y.max(q.y));
    }
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let h = n.dot(&p.coords) + d;
        if !(h > prism.floor_offset && h <= prism.height) {
            continue;
        }
        let q = Point2::new(u.dot(&p.coords), v.dot(&p.coords));
        if q.x < lo.x || q.x > hi.x || q.y < lo.y || q.y > hi.y {
            continue;
        }
        if prism.base.contains(&q) {
            out.push(i);
        }
    }
    out
}
