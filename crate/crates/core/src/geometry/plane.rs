use nalgebra::{Matrix3, Point2, Point3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Minimal samples whose triangle is smaller than this are redrawn.
const MIN_SAMPLE_AREA: f64 = 1e-10;

/// Plane `normal · p + d = 0`, oriented so the camera origin lies on the
/// positive side whenever the plane does not pass through it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub d: f64,
}

impl Plane {
    /// Normalizes and orients. `None` for a zero normal.
    pub fn new(normal: Vector3<f64>, d: f64) -> Option<Self> {
        let len = normal.norm();
        if !(len > 0.0) || !len.is_finite() || !d.is_finite() {
            return None;
        }
        let (normal, d) = (normal / len, d / len);
        Some(if d < 0.0 {
            Self {
                normal: -normal,
                d: -d,
            }
        } else {
            Self { normal, d }
        })
    }

    pub fn through_points(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Option<Self> {
        let n = (b - a).cross(&(c - a));
        if n.norm() == 0.0 {
            return None;
        }
        let n = n.normalize();
        Self::new(n, -n.dot(&a.coords))
    }

    /// Same plane with the opposite orientation.
    pub fn flipped(&self) -> Self {
        Self {
            normal: -self.normal,
            d: -self.d,
        }
    }

    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) + self.d
    }

    /// Orthonormal in-plane basis `(u, v)` with `u × v = normal`.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.normal;
        let a = n.abs();
        let seed = if a.x <= a.y && a.x <= a.z {
            Vector3::x()
        } else if a.y <= a.z {
            Vector3::y()
        } else {
            Vector3::z()
        };
        let u = seed.cross(&n).normalize();
        let v = n.cross(&u);
        (u, v)
    }

    /// In-plane coordinates of the orthogonal projection of `p`.
    pub fn project_2d(&self, p: &Point3<f64>) -> Point2<f64> {
        let (u, v) = self.basis();
        Point2::new(u.dot(&p.coords), v.dot(&p.coords))
    }

    /// Point on the plane with in-plane coordinates `q`.
    pub fn lift(&self, q: &Point2<f64>) -> Point3<f64> {
        let (u, v) = self.basis();
        Point3::from(u * q.x + v * q.y - self.normal * self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    /// Inlier distance in meters.
    pub threshold: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            threshold: 0.005,
            max_iterations: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneFit {
    pub plane: Plane,
    pub inlier_indices: Vec<usize>,
    pub iterations_run: usize,
    pub seed: u64,
    pub threshold: f64,
}

/// Total-least-squares plane through the selected points: the smallest
/// eigenvector of their covariance, anchored at the centroid.
pub fn fit_plane_tls(points: &[Point3<f64>], indices: &[usize]) -> Option<Plane> {
    if indices.len() < 3 {
        return None;
    }
    let inv = 1.0 / indices.len() as f64;
    let centroid = indices
        .iter()
        .fold(Vector3::zeros(), |acc, &i| acc + points[i].coords)
        * inv;
    let mut cov = Matrix3::zeros();
    for &i in indices {
        let r = points[i].coords - centroid;
        cov += r * r.transpose();
    }
    let eig = SymmetricEigen::new(cov * inv);
    let k = eig.eigenvalues.imin();
    let n: Vector3<f64> = eig.eigenvectors.column(k).into_owned();
    Plane::new(n, -n.dot(&centroid))
}

fn inliers(points: &[Point3<f64>], plane: &Plane, threshold: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() <= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Counts inliers, giving up once the hypothesis can no longer beat `best`.
fn score(points: &[Point3<f64>], plane: &Plane, threshold: f64, best: usize) -> usize {
    let allowed_misses = points.len().saturating_sub(best + 1);
    let mut count = 0;
    let mut misses = 0;
    for p in points {
        if plane.signed_distance(p).abs() <= threshold {
            count += 1;
        } else {
            misses += 1;
            if misses > allowed_misses {
                return 0;
            }
        }
    }
    count
}

/// Largest triangle area reachable by a farthest-point sweep; zero (or
/// below the sample gate) means the cloud is effectively collinear.
fn spread_area(points: &[Point3<f64>]) -> f64 {
    let a = points[0];
    let b = points
        .iter()
        .max_by(|p, q| (*p - a).norm_squared().total_cmp(&(*q - a).norm_squared()))
        .copied()
        .unwrap_or(a);
    let ab = b - a;
    points
        .iter()
        .map(|p| 0.5 * ab.cross(&(p - a)).norm())
        .fold(0.0, f64::max)
}

/// Fits the dominant plane by RANSAC over random 3-point samples, refines
/// the winner by total least squares over its inliers, and recomputes the
/// inlier set once against the refined plane.
///
/// Sampling is sequential from a ChaCha8 stream seeded with `params.seed`,
/// so identical inputs give bitwise-identical fits.
pub fn ransac_plane(
    points: &[Point3<f64>],
    params: &RansacParams,
) -> Result<PlaneFit, GeometryError> {
    if !(params.threshold > 0.0) {
        return Err(GeometryError::InvalidParameter(
            "threshold must be positive",
        ));
    }
    if params.max_iterations == 0 {
        return Err(GeometryError::InvalidParameter(
            "max_iterations must be positive",
        ));
    }
    let n = points.len();
    if n < 3 {
        return Err(GeometryError::TooFewPoints {
            needed: 3,
            found: n,
        });
    }
    if spread_area(points) < MIN_SAMPLE_AREA {
        return Err(GeometryError::DegenerateCloud);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let max_rejections = 100 * params.max_iterations.max(10);
    let mut rejections = 0;
    let mut best: Option<(Plane, usize)> = None;
    let mut iterations = 0;

    while iterations < params.max_iterations {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n);
        while j == i {
            j = rng.random_range(0..n);
        }
        let mut k = rng.random_range(0..n);
        while k == i || k == j {
            k = rng.random_range(0..n);
        }
        let (a, b, c) = (points[i], points[j], points[k]);
        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        let hypothesis = if area >= MIN_SAMPLE_AREA {
            Plane::through_points(&a, &b, &c)
        } else {
            None
        };
        let Some(plane) = hypothesis else {
            rejections += 1;
            if rejections > max_rejections {
                break;
            }
            continue;
        };
        iterations += 1;
        let best_count = best.map_or(0, |(_, c)| c);
        let count = score(points, &plane, params.threshold, best_count);
        if count > best_count {
            best = Some((plane, count));
        }
    }

    let (plane, _) = best.ok_or(GeometryError::DegenerateCloud)?;
    let first = inliers(points, &plane, params.threshold);
    let plane = fit_plane_tls(points, &first).unwrap_or(plane);
    let inlier_indices = inliers(points, &plane, params.threshold);
    Ok(PlaneFit {
        plane,
        inlier_indices,
        iterations_run: iterations,
        seed: params.seed,
        threshold: params.threshold,
    })
}
