//! Conversion of tracked joint positions into per-bone rigid transforms.
//!
//! The palm is fit as one rigid body (least-squares over the palm joints). Each
//! finger bone then inherits its parent's rotation and adds the minimal swing
//! that aligns the rest bone direction with the tracked one, anchored at the
//! tracked head joint. For tracked bones with rest lengths every joint is
//! reproduced exactly.

use nalgebra::{Point3, Rotation3, Translation3, Unit, Vector3};

use super::{check_joints, HandSkeleton, BONE_COUNT, PALM_JOINTS, WRIST};
use crate::error::{Error, Result};
use crate::geometry::Rigid;
use crate::spatial_calib::solve_rigid_registration;

/// Fits bone transforms taking `rest` (the template skeleton) onto `raw_joints`.
pub fn pose_from_tracker(rest: &HandSkeleton, raw_joints: &[Point3<f64>], timestamp_ms: i64) -> Result<HandSkeleton> {
    check_joints(raw_joints)?;
    check_joints(&rest.joints)?;

    let tracked: Vec<_> = PALM_JOINTS.iter().map(|&j| raw_joints[j]).collect();
    let template: Vec<_> = PALM_JOINTS.iter().map(|&j| rest.joints[j]).collect();
    let palm = solve_rigid_registration(&tracked, &template)
        .map_err(|e| Error::Validation(format!("palm joints do not define a frame: {e}")))?;
    let palm_rotation = palm.rotation;

    let mut rotations: Vec<Rotation3<f64>> = Vec::with_capacity(BONE_COUNT);
    let mut transforms = Vec::with_capacity(BONE_COUNT);
    for &(head, child) in &rest.bones {
        let parent_rotation = if head == WRIST {
            palm_rotation
        } else {
            rotations[head - 1]
        };
        let rest_dir = rest.joints[child] - rest.joints[head];
        let tracked_dir = raw_joints[child] - raw_joints[head];
        let swing = swing_between(&(parent_rotation * rest_dir), &tracked_dir);
        let r = swing * parent_rotation;
        let t = raw_joints[head].coords - r * rest.joints[head].coords;
        rotations.push(r);
        transforms.push(Rigid::from_parts(Translation3::from(t), r));
    }
    HandSkeleton::new(raw_joints.to_vec(), transforms, timestamp_ms)
}

/// Smallest rotation taking direction `from` to direction `to`.
fn swing_between(from: &Vector3<f64>, to: &Vector3<f64>) -> Rotation3<f64> {
    if from.norm() < 1e-12 || to.norm() < 1e-12 {
        return Rotation3::identity();
    }
    let (a, b) = (from.normalize(), to.normalize());
    let cross = a.cross(&b);
    let sin = cross.norm();
    let cos = a.dot(&b);
    if sin < 1e-15 {
        if cos > 0.0 {
            return Rotation3::identity();
        }
        // Antiparallel: half turn about any axis orthogonal to `from`.
        let helper = if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        return Rotation3::from_axis_angle(&Unit::new_normalize(a.cross(&helper)), std::f64::consts::PI);
    }
    Rotation3::from_axis_angle(&Unit::new_unchecked(cross / sin), sin.atan2(cos))
}
