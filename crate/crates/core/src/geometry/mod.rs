//! Support-plane detection and object-level geometry.

pub(crate) mod dbscan;
pub(crate) mod hull;
pub(crate) mod obb;
pub(crate) mod plane;
pub(crate) mod prism;

pub use dbscan::{dbscan, Assignment, Clustering, DbscanParams};
pub use hull::{convex_hull_2d, convex_hull_on_plane, cross, ConvexPolygon2D};
pub use obb::{pca_obb, OrientedBoundingBox};
pub use plane::{fit_plane_tls, ransac_plane, Plane, PlaneFit, RansacParams};
pub use prism::{points_in_prism, ExtrusionParams, Prism};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("point set is degenerate (collinear or coincident)")]
    DegenerateCloud,
    #[error("projected hull is degenerate (all points collinear)")]
    DegenerateHull,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}
