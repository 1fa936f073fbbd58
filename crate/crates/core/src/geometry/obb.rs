use std::cmp::Ordering;

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Extents closer than this are treated as equal when ordering axes.
const EXTENT_TIE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBoundingBox {
    pub center: Point3<f64>,
    /// Orthonormal, right-handed, ordered by descending half-extent.
    pub axes: [Vector3<f64>; 3],
    pub half_extents: [f64; 3],
}

impl OrientedBoundingBox {
    pub fn contains(&self, p: &Point3<f64>, tol: f64) -> bool {
        let r = p - self.center;
        (0..3).all(|i| r.dot(&self.axes[i]).abs() <= self.half_extents[i] + tol)
    }

    pub fn corners(&self) -> [Point3<f64>; 8] {
        let mut out = [self.center; 8];
        for (k, c) in out.iter_mut().enumerate() {
            for i in 0..3 {
                let s = if k >> i & 1 == 1 { 1.0 } else { -1.0 };
                *c += self.axes[i] * (s * self.half_extents[i]);
            }
        }
        out
    }
}

/// Flip so the largest-magnitude component is positive.
fn sign_normalized(v: Vector3<f64>) -> Vector3<f64> {
    let k = v.iamax();
    if v[k] < 0.0 {
        -v
    } else {
        v
    }
}

fn abs_lex_desc(a: &Vector3<f64>, b: &Vector3<f64>) -> Ordering {
    let (a, b) = (a.abs(), b.abs());
    b.x.total_cmp(&a.x)
        .then(b.y.total_cmp(&a.y))
        .then(b.z.total_cmp(&a.z))
}

fn projection_range(
    points: &[Point3<f64>],
    origin: &Vector3<f64>,
    axis: &Vector3<f64>,
) -> (f64, f64) {
    points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let t = (p.coords - origin).dot(axis);
            (lo.min(t), hi.max(t))
        })
}

/// PCA box: covariance eigenvectors about the centroid, ordered by
/// projected extent (ties broken toward the lexicographically larger
/// absolute components), centered on the midpoint of the projections.
///
/// The first two axes are sign-normalized (largest component positive);
/// the third is their cross product.
pub fn pca_obb(points: &[Point3<f64>]) -> Result<OrientedBoundingBox, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::TooFewPoints {
            needed: 3,
            found: points.len(),
        });
    }
    let inv = 1.0 / points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) * inv;
    let mut cov = Matrix3::zeros();
    let mut spread: f64 = 0.0;
    for p in points {
        let r = p.coords - centroid;
        cov += r * r.transpose();
        spread = spread.max(r.norm());
    }
    if spread < 1e-12 {
        return Err(GeometryError::DegenerateCloud);
    }
    let eig = SymmetricEigen::new(cov * inv);
    let axes: Vec<Vector3<f64>> = (0..3)
        .map(|i| sign_normalized(eig.eigenvectors.column(i).into_owned()))
        .collect();
    let extents: Vec<f64> = axes
        .iter()
        .map(|a| {
            let (lo, hi) = projection_range(points, &centroid, a);
            0.5 * (hi - lo)
        })
        .collect();

    let before = |a: usize, b: usize| -> bool {
        if (extents[a] - extents[b]).abs() < EXTENT_TIE {
            abs_lex_desc(&axes[a], &axes[b]) == Ordering::Less
        } else {
            extents[a] > extents[b]
        }
    };
    let mut order = [0usize, 1, 2];
    for i in 1..3 {
        let mut j = i;
        while j > 0 && before(order[j], order[j - 1]) {
            order.swap(j, j - 1);
            j -= 1;
        }
    }

    let a0 = axes[order[0]];
    let a1 = axes[order[1]];
    let a2 = a0.cross(&a1);
    let axes = [a0, a1, a2];
    let mut center = centroid;
    let mut half_extents = [0.0; 3];
    for i in 0..3 {
        let (lo, hi) = projection_range(points, &centroid, &axes[i]);
        half_extents[i] = 0.5 * (hi - lo);
        center += axes[i] * (0.5 * (hi + lo));
    }
    Ok(OrientedBoundingBox {
        center: Point3::from(center),
        axes,
        half_extents,
    })
}
