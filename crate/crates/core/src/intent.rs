//! Palm-ray targeting and the arm/dwell close trigger.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grasp::SceneObjects;

/// Tolerance on the dwell deadline, absorbing accumulated timestamp
/// rounding such as `k / 30.0` sums.
const DWELL_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntentError {
    #[error("scene has no objects")]
    EmptyScene,
    #[error("timestamp {t} precedes previous timestamp {previous}")]
    NonMonotonicTime { previous: f64, t: f64 },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("close time {close} precedes trajectory start {start}")]
    CloseBeforeStart { start: f64, close: f64 },
    #[error("ray direction must have unit length")]
    InvalidRay,
    #[error("invalid trigger config: {0}")]
    InvalidConfig(&'static str),
}

/// Ray from the palm camera along the palm direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PalmRay {
    pub origin: Point3<f64>,
    pub direction: Vector3<f64>,
}

impl PalmRay {
    /// Normalizes `direction`; fails on a zero or non-finite direction.
    pub fn new(origin: Point3<f64>, direction: Vector3<f64>) -> Result<Self, IntentError> {
        let len = direction.norm();
        if !(len > 0.0 && len.is_finite()) {
            return Err(IntentError::InvalidRay);
        }
        Ok(Self {
            origin,
            direction: direction / len,
        })
    }

    pub fn validate(&self) -> Result<(), IntentError> {
        if (self.direction.norm() - 1.0).abs() > 1e-9 {
            return Err(IntentError::InvalidRay);
        }
        Ok(())
    }
}

/// Orthogonal distance from `p` to the forward ray; points behind the
/// origin are measured to the origin.
pub fn point_to_ray_distance(p: &Point3<f64>, ray: &PalmRay) -> f64 {
    let r = p - ray.origin;
    let t = r.dot(&ray.direction).max(0.0);
    (r - ray.direction * t).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub object_id: usize,
    pub ray_distance: f64,
    /// Distance from the ray origin to the grasp midpoint.
    pub range: f64,
}

/// Object whose grasp midpoint lies closest to the palm ray. Ties go to
/// the lowest object id.
pub fn nearest_target(objects: &SceneObjects, ray: &PalmRay) -> Result<Target, IntentError> {
    let mut best: Option<Target> = None;
    for o in &objects.objects {
        let m = o.grasp.midpoint();
        let dist = point_to_ray_distance(&m, ray);
        let better = match best {
            None => true,
            Some(b) => dist < b.ray_distance || (dist == b.ray_distance && o.id < b.object_id),
        };
        if better {
            best = Some(Target {
                object_id: o.id,
                ray_distance: dist,
                range: (m - ray.origin).norm(),
            });
        }
    }
    best.ok_or(IntentError::EmptyScene)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriggerConfig {
    pub arm_distance: f64,
    pub dwell: f64,
    pub hysteresis: f64,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            arm_distance: 0.30,
            dwell: 3.0,
            hysteresis: 0.02,
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<(), IntentError> {
        if !(self.arm_distance > 0.0) {
            return Err(IntentError::InvalidConfig("arm_distance must be positive"));
        }
        if !(self.dwell >= 0.0) || !(self.hysteresis >= 0.0) {
            return Err(IntentError::InvalidConfig(
                "dwell and hysteresis must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub object_id: usize,
    pub range: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "lowercase")]
pub enum Phase {
    Idle,
    Armed { armed_at: f64, target_id: usize },
    Closed { closed_at: f64, target_id: usize },
}

/// Glove close command, serialized as `{"event":"close","t":..,"target":..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloseCommand {
    pub event: CloseEvent,
    pub t: f64,
    pub target: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloseEvent {
    Close,
}

impl CloseCommand {
    pub fn new(t: f64, target: usize) -> Self {
        Self {
            event: CloseEvent::Close,
            t,
            target,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("close command serializes")
    }
}

/// Trigger state machine. Only [`TriggerState::step`] changes the phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerState {
    phase: Phase,
    last_t: Option<f64>,
}

impl Default for TriggerState {
    fn default() -> Self {
        Self::new()
    }
}

impl TriggerState {
    pub fn new() -> Self {
        Self {
            phase: Phase::Idle,
            last_t: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.phase, Phase::Closed { .. })
    }

    /// Feeds one observation. Arming happens when the range is within
    /// `arm_distance`; an armed trigger disarms when the range leaves the
    /// hysteresis band or the target changes (re-arming immediately on the
    /// new target if it is in range), and closes on the first observation
    /// at or after `armed_at + dwell`.
    pub fn step(
        &mut self,
        obs: Observation,
        config: &TriggerConfig,
    ) -> Result<Option<CloseCommand>, IntentError> {
        if let Some(previous) = self.last_t {
            if !(obs.t >= previous) {
                return Err(IntentError::NonMonotonicTime { previous, t: obs.t });
            }
        }
        self.last_t = Some(obs.t);

        if let Phase::Armed { target_id, .. } = self.phase {
            if obs.range > config.arm_distance + config.hysteresis || obs.object_id != target_id {
                self.phase = Phase::Idle;
            }
        }
        if self.phase == Phase::Idle && obs.range <= config.arm_distance {
            self.phase = Phase::Armed {
                armed_at: obs.t,
                target_id: obs.object_id,
            };
        }
        if let Phase::Armed {
            armed_at,
            target_id,
        } = self.phase
        {
            if obs.t - armed_at >= config.dwell - DWELL_EPS {
                self.phase = Phase::Closed {
                    closed_at: obs.t,
                    target_id,
                };
                return Ok(Some(CloseCommand::new(obs.t, target_id)));
            }
        }
        Ok(None)
    }
}

/// One camera pose sample of a reach trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub t: f64,
    pub origin: Point3<f64>,
    pub direction: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproachMetrics {
    pub time_to_completion: f64,
    pub travel_length: f64,
}

pub fn approach_metrics(
    trajectory: &[PoseSample],
    close_time: f64,
) -> Result<ApproachMetrics, IntentError> {
    let first = trajectory.first().ok_or(IntentError::EmptyTrajectory)?;
    if close_time < first.t {
        return Err(IntentError::CloseBeforeStart {
            start: first.t,
            close: close_time,
        });
    }
    let travel_length = trajectory
        .windows(2)
        .take_while(|w| w[1].t <= close_time)
        .map(|w| (w[1].origin - w[0].origin).norm())
        .sum();
    Ok(ApproachMetrics {
        time_to_completion: close_time - first.t,
        travel_length,
    })
}
