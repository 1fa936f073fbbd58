use std::cmp::Ordering;

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, PlaneFit};

/// Twice the signed area of triangle `abc`; positive for a left turn.
pub fn cross(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Strictly convex polygon, counter-clockwise, starting at the
/// lexicographically smallest vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon2D {
    vertices: Vec<Point2<f64>>,
}

impl ConvexPolygon2D {
    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        let o = self.vertices[0];
        self.vertices
            .windows(2)
            .map(|w| cross(&o, &w[0], &w[1]))
            .sum::<f64>()
            * 0.5
    }

    /// Boundary-inclusive containment test.
    pub fn contains(&self, q: &Point2<f64>) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| cross(&self.vertices[i], &self.vertices[(i + 1) % n], q) >= 0.0)
    }
}

fn lexicographic(a: &Point2<f64>, b: &Point2<f64>) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

/// Andrew's monotone chain. Collinear boundary points are dropped.
pub fn convex_hull_2d(points: &[Point2<f64>]) -> Result<ConvexPolygon2D, GeometryError> {
    let mut pts = points.to_vec();
    pts.sort_by(lexicographic);
    pts.dedup();
    if pts.len() < 3 {
        return Err(GeometryError::DegenerateHull);
    }
    let mut hull: Vec<Point2<f64>> = Vec::with_capacity(2 * pts.len());
    for p in pts.iter() {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    if hull.len() < 3 {
        return Err(GeometryError::DegenerateHull);
    }
    Ok(ConvexPolygon2D { vertices: hull })
}

/// Hull of the fit's inliers in the plane's own 2D basis.
pub fn convex_hull_on_plane(
    points: &[Point3<f64>],
    fit: &PlaneFit,
) -> Result<ConvexPolygon2D, GeometryError> {
    if fit.inlier_indices.len() < 3 {
        return Err(GeometryError::DegenerateHull);
    }
    let (u, v) = fit.plane.basis();
    let projected: Vec<Point2<f64>> = fit
        .inlier_indices
        .iter()
        .map(|&i| Point2::new(u.dot(&points[i].coords), v.dot(&points[i].coords)))
        .collect();
    convex_hull_2d(&projected)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::{Plane, PlaneFit};
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(n^3) reference: `i -> j` is a hull edge iff every point lies left of
    /// it or on the closed segment. Walk the edges from the lowest vertex.
    pub(crate) fn brute_force_hull(points: &[Point2<f64>]) -> Vec<Point2<f64>> {
        let mut pts = points.to_vec();
        pts.sort_by(lexicographic);
        pts.dedup();
        let n = pts.len();
        let on_segment = |a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>| {
            c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
        };
        let mut next = vec![None; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let edge = (0..n).all(|k| {
                    let c = cross(&pts[i], &pts[j], &pts[k]);
                    c > 0.0 || (c == 0.0 && on_segment(&pts[i], &pts[j], &pts[k]))
                });
                if edge {
                    next[i] = Some(j);
                }
            }
        }
        let mut out = vec![pts[0]];
        let mut cur = 0;
        while let Some(j) = next[cur] {
            if j == 0 {
                break;
            }
            out.push(pts[j]);
            cur = j;
            assert!(out.len() <= n, "edge walk did not close");
        }
        out
    }

    #[test]
    fn square_with_center() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.5),
        ];
        let hull = convex_hull_2d(&pts).unwrap();
        assert_eq!(
            hull.vertices(),
            &[
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0)
            ]
        );
        assert!((hull.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_and_collinear_cases() {
        let tri = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert_eq!(convex_hull_2d(&tri).unwrap().vertices().len(), 3);
        let line: Vec<_> = (0..5)
            .map(|i| Point2::new(i as f64, 2.0 * i as f64))
            .collect();
        assert_eq!(convex_hull_2d(&line), Err(GeometryError::DegenerateHull));
        let edge_mid = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 1.0),
        ];
        assert_eq!(convex_hull_2d(&edge_mid).unwrap().vertices().len(), 3);
    }

    #[test]
    fn disk_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<_> = (0..50)
            .map(|_| {
                let r: f64 = rng.random::<f64>().sqrt();
                let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                Point2::new(r * t.cos(), r * t.sin())
            })
            .collect();
        assert_eq!(
            convex_hull_2d(&pts).unwrap().vertices(),
            brute_force_hull(&pts).as_slice()
        );
    }

    #[test]
    fn hull_on_plane_uses_inliers_only() {
        let pts = vec![
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, 1.0),
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(0.0, 1.0, 1.0),
            Point3::new(5.0, 5.0, 3.0),
        ];
        let fit = PlaneFit {
            plane: Plane::new(Vector3::z(), -1.0).unwrap(),
            inlier_indices: vec![0, 1, 2, 3],
            iterations_run: 0,
            seed: 0,
            threshold: 0.01,
        };
        let hull = convex_hull_on_plane(&pts, &fit).unwrap();
        assert_eq!(hull.vertices().len(), 4);
        assert!((hull.area() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn hull_is_permutation_invariant(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..40),
            seed in any::<u64>(),
        ) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
            let mut shuffled = pts.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            prop_assert_eq!(convex_hull_2d(&pts), convex_hull_2d(&shuffled));
        }

        #[test]
        fn hull_contains_every_input(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..40),
        ) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
            if let Ok(h) = convex_hull_2d(&pts) {
                for w in 0..h.vertices().len() {
                    let n = h.vertices().len();
                    let (a, b, c) = (h.vertices()[w], h.vertices()[(w + 1) % n], h.vertices()[(w + 2) % n]);
                    prop_assert!(cross(&a, &b, &c) > 0.0);
                }
                for p in &pts {
                    // allow round-off for points that sat on a dropped collinear edge
                    let n = h.vertices().len();
                    let worst = (0..n)
                        .map(|i| cross(&h.vertices()[i], &h.vertices()[(i + 1) % n], p))
                        .fold(f64::INFINITY, f64::min);
                    prop_assert!(worst >= -1e-12);
                }
            }
        }
    }
}
