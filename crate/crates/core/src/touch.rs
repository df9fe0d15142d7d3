//! Mutual-touch detection on the shared screen plane and simulated haptics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton_rig::HandSkeleton;
use crate::spatial_calib::ScreenGeometry;

pub const DEFAULT_JOINT_SCREEN_THRESHOLD: f64 = 0.02;
pub const DEFAULT_OVERLAP_AREA_CM2: f64 = 50.0;
pub const DEFAULT_REFRACTORY_MS: i64 = 500;
pub const HAPTIC_DELAY_MS: i64 = 60;
pub const HAPTIC_PULSE_MS: i64 = 200;
/// Detection cadence of the receiver.
pub const DETECTION_PERIOD_MS: i64 = 20;

const CM2_PER_M2: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TouchParams {
    /// Meters.
    pub joint_screen_threshold: f64,
    /// Square centimeters.
    pub overlap_area_threshold: f64,
    pub refractory_ms: i64,
}

impl Default for TouchParams {
    fn default() -> Self {
        Self {
            joint_screen_threshold: DEFAULT_JOINT_SCREEN_THRESHOLD,
            overlap_area_threshold: DEFAULT_OVERLAP_AREA_CM2,
            refractory_ms: DEFAULT_REFRACTORY_MS,
        }
    }
}

impl TouchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.joint_screen_threshold > 0.0 && self.overlap_area_threshold > 0.0) || self.refractory_ms < 0 {
            return Err(Error::Validation("touch thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle on the screen plane, meters in screen coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl ScreenRect {
    pub fn point(x: f64, y: f64) -> Self {
        Self { x0: x, y0: y, x1: x, y1: y }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    /// Square meters.
    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn include(&mut self, x: f64, y: f64) {
        self.x0 = self.x0.min(x);
        self.y0 = self.y0.min(y);
        self.x1 = self.x1.max(x);
        self.y1 = self.y1.max(y);
    }

    pub fn intersection_area(&self, other: &ScreenRect) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        w.max(0.0) * h.max(0.0)
    }
}

/// Joints within `threshold` of the screen plane whose projection lies on the panel.
pub fn near_screen_joints(skeleton: &HandSkeleton, screen: &ScreenGeometry, threshold: f64) -> Vec<usize> {
    skeleton
        .joints
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let s = screen.to_screen(p);
            s.z.abs() <= threshold && screen.contains(s.x, s.y)
        })
        .map(|(j, _)| j)
        .collect()
}

/// Bounding rectangle of the orthogonal projections of `joints`.
pub fn projected_bbox(skeleton: &HandSkeleton, joints: &[usize], screen: &ScreenGeometry) -> Option<ScreenRect> {
    let mut it = joints.iter().map(|&j| screen.to_screen(&skeleton.joints[j]));
    let first = it.next()?;
    let mut r = ScreenRect::point(first.x, first.y);
    for p in it {
        r.include(p.x, p.y);
    }
    Some(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchEvent {
    pub timestamp_ms: i64,
    pub overlap_area_cm2: f64,
    pub local_bbox: ScreenRect,
    pub remote_bbox: ScreenRect,
    pub local_joints: Vec<usize>,
    pub remote_joints: Vec<usize>,
    pub haptic_delay_ms: i64,
}

/// Overlap test without refractory state. `remote` must already be in the local frame.
pub fn evaluate_touch(
    local: &HandSkeleton,
    remote: &HandSkeleton,
    screen: &ScreenGeometry,
    params: &TouchParams,
    now_ms: i64,
) -> Option<TouchEvent> {
    let lj = near_screen_joints(local, screen, params.joint_screen_threshold);
    let rj = near_screen_joints(remote, screen, params.joint_screen_threshold);
    let lb = projected_bbox(local, &lj, screen)?;
    let rb = projected_bbox(remote, &rj, screen)?;
    let area = lb.intersection_area(&rb) * CM2_PER_M2;
    (area >= params.overlap_area_threshold).then(|| TouchEvent {
        timestamp_ms: now_ms,
        overlap_area_cm2: area,
        local_bbox: lb,
        remote_bbox: rb,
        local_joints: lj,
        remote_joints: rj,
        haptic_delay_ms: HAPTIC_DELAY_MS,
    })
}

/// Owns the refractory state of one detection stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TouchDetector {
    pub params: TouchParams,
    last_event_ms: Option<i64>,
}

impl TouchDetector {
    pub fn new(params: TouchParams) -> Self {
        Self {
            params,
            last_event_ms: None,
        }
    }

    pub fn last_event_ms(&self) -> Option<i64> {
        self.last_event_ms
    }

    /// Emits an event when the hands overlap and the refractory window has elapsed.
    pub fn detect(
        &mut self,
        local: &HandSkeleton,
        remote: &HandSkeleton,
        screen: &ScreenGeometry,
        now_ms: i64,
    ) -> Option<TouchEvent> {
        if let Some(last) = self.last_event_ms {
            if now_ms - last < self.params.refractory_ms {
                return None;
            }
        }
        let ev = evaluate_touch(local, remote, screen, &self.params, now_ms)?;
        self.last_event_ms = Some(now_ms);
        Some(ev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HapticPulse {
    pub scheduled_ms: i64,
    pub duration_ms: i64,
}

/// Append-only log standing in for the vibration motor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulatedActuator {
    pub log: Vec<HapticPulse>,
}

/// Schedules a vibration pulse after the actuation delay.
pub fn trigger_haptic(event: &TouchEvent, actuator: &mut SimulatedActuator) -> HapticPulse {
    let pulse = HapticPulse {
        scheduled_ms: event.timestamp_ms + event.haptic_delay_ms,
        duration_ms: HAPTIC_PULSE_MS,
    };
    actuator.log.push(pulse);
    pulse
}
