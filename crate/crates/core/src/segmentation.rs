//! Handle extraction from per-point category scores, plus IoU scoring.
//!
//! The score matrix is the seam where an external point-wise classifier
//! plugs in. Extraction keeps the points whose highest score is
//! [`CategoryCode::Handle`], then denoises them with DBSCAN.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{CategoryCode, PointCloud, Scores};
use crate::geometry::dbscan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentationError {
    #[error("only {found} handle points survived, need at least {needed}")]
    NoHandleFound { found: usize, needed: usize },
    #[error("{what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Parameters of the handle extractor.
///
/// Setting `dbscan_min_pts` to 0 turns denoising off; the argmax selection
/// is then returned as is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandleExtractorParams {
    pub min_handle_points: usize,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub keep_largest_component: bool,
}

impl Default for HandleExtractorParams {
    fn default() -> Self {
        Self {
            min_handle_points: 10,
            dbscan_eps: 0.02,
            dbscan_min_pts: 10,
            keep_largest_component: true,
        }
    }
}

impl HandleExtractorParams {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        if self.min_handle_points < 3 {
            return Err(SegmentationError::InvalidParameter(
                "min_handle_points must be at least 3",
            ));
        }
        if self.dbscan_min_pts > 0 && !(self.dbscan_eps > 0.0 && self.dbscan_eps.is_finite()) {
            return Err(SegmentationError::InvalidParameter(
                "dbscan_eps must be positive",
            ));
        }
        Ok(())
    }
}

/// Extracted handle points with their indices in the parent cloud,
/// sorted by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandleCloud {
    pub points: Vec<Point3<f64>>,
    pub source_indices: Vec<usize>,
}

impl HandleCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(nalgebra::Vector3::zeros(), |a, p| a + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SceneMode {
    Simple,
    Complex(HandleCloud),
}

impl SceneMode {
    pub fn handle(&self) -> Option<&HandleCloud> {
        match self {
            Self::Simple => None,
            Self::Complex(h) => Some(h),
        }
    }
}

pub fn extract_handles(
    cloud: &PointCloud,
    scores: &Scores,
    params: &HandleExtractorParams,
) -> Result<HandleCloud, SegmentationError> {
    params.validate()?;
    if scores.len() != cloud.len() {
        return Err(SegmentationError::LengthMismatch {
            what: "score matrix",
            expected: cloud.len(),
            found: scores.len(),
        });
    }
    let selected: Vec<usize> = (0..cloud.len())
        .filter(|&i| scores.argmax(i) == CategoryCode::Handle)
        .collect();

    let kept = if params.dbscan_min_pts == 0 || selected.is_empty() {
        selected
    } else {
        let pts: Vec<Point3<f64>> = selected.iter().map(|&i| cloud.points()[i]).collect();
        let clustering = dbscan(&pts, params.dbscan_eps, params.dbscan_min_pts);
        let mut members = clustering.members();
        if params.keep_largest_component {
            // Strict comparison keeps the lowest cluster id on ties.
            let mut best: Option<usize> = None;
            for (c, m) in members.iter().enumerate() {
                if best.is_none_or(|b| m.len() > members[b].len()) {
                    best = Some(c);
                }
            }
            members = best
                .map(|b| vec![std::mem::take(&mut members[b])])
                .unwrap_or_default();
        }
        let mut kept: Vec<usize> = members.into_iter().flatten().map(|k| selected[k]).collect();
        kept.sort_unstable();
        kept
    };

    if kept.len() < params.min_handle_points {
        return Err(SegmentationError::NoHandleFound {
            found: kept.len(),
            needed: params.min_handle_points,
        });
    }
    Ok(HandleCloud {
        points: kept.iter().map(|&i| cloud.points()[i]).collect(),
        source_indices: kept,
    })
}

/// Complex when scores are given and a handle can be extracted, Simple
/// otherwise. Never fails: any extraction error, including a score/point
/// count mismatch, yields Simple.
pub fn classify_mode(
    cloud: &PointCloud,
    scores: Option<&Scores>,
    params: &HandleExtractorParams,
) -> SceneMode {
    match scores.map(|s| extract_handles(cloud, s, params)) {
        Some(Ok(handle)) => SceneMode::Complex(handle),
        _ => SceneMode::Simple,
    }
}

fn check_lengths(pred: &[CategoryCode], truth: &[CategoryCode]) -> Result<(), SegmentationError> {
    if pred.len() != truth.len() {
        return Err(SegmentationError::LengthMismatch {
            what: "prediction",
            expected: truth.len(),
            found: pred.len(),
        });
    }
    Ok(())
}

/// Intersection over union of the points labeled `category` in each array.
/// Two empty sets score 1.0.
pub fn iou(
    pred: &[CategoryCode],
    truth: &[CategoryCode],
    category: CategoryCode,
) -> Result<f64, SegmentationError> {
    let mut counts = IouCounts::default();
    counts.add(pred, truth)?;
    Ok(counts.ratio(category))
}

/// Running intersection and union counts per category, for aggregating IoU
/// over many frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IouCounts {
    pub intersection: [u64; 3],
    pub union: [u64; 3],
}

impl IouCounts {
    pub fn add(
        &mut self,
        pred: &[CategoryCode],
        truth: &[CategoryCode],
    ) -> Result<(), SegmentationError> {
        check_lengths(pred, truth)?;
        for (&p, &t) in pred.iter().zip(truth) {
            if p == t {
                self.intersection[p as usize] += 1;
                self.union[p as usize] += 1;
            } else {
                self.union[p as usize] += 1;
                self.union[t as usize] += 1;
            }
        }
        Ok(())
    }

    pub fn ratio(&self, category: CategoryCode) -> f64 {
        let k = category as usize;
        if self.union[k] == 0 {
            1.0
        } else {
            self.intersection[k] as f64 / self.union[k] as f64
        }
    }

    pub fn report(&self) -> IouReport {
        IouReport {
            background: self.ratio(CategoryCode::Background),
            body: self.ratio(CategoryCode::Body),
            handle: self.ratio(CategoryCode::Handle),
        }
    }
}

/// Per-category IoU, serialized as `{"background": r, "body": r, "handle": r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IouReport {
    pub background: f64,
    pub body: f64,
    pub handle: f64,
}

impl IouReport {
    pub fn get(&self, category: CategoryCode) -> f64 {
        match category {
            CategoryCode::Background => self.background,
            CategoryCode::Body => self.body,
            CategoryCode::Handle => self.handle,
        }
    }
}

pub fn iou_report(
    pred: &[CategoryCode],
    truth: &[CategoryCode],
) -> Result<IouReport, SegmentationError> {
    let mut counts = IouCounts::default();
    counts.add(pred, truth)?;
    Ok(counts.report())
}
