//! Hand skeleton, linear blend skinning and bone-length shape adaptation.
//!
//! The skeleton has a fixed 21-joint / 20-bone layout rooted at the wrist:
//!
//! | joints  | finger | order                      |
//! |---------|--------|----------------------------|
//! | 0       | wrist  |                            |
//! | 1..=4   | thumb  | CMC, MCP, IP, tip          |
//! | 5..=8   | index  | MCP, PIP, DIP, tip         |
//! | 9..=12  | middle | MCP, PIP, DIP, tip         |
//! | 13..=16 | ring   | MCP, PIP, DIP, tip         |
//! | 17..=20 | pinky  | MCP, PIP, DIP, tip         |
//!
//! Bone `b` connects `parent(b + 1)` to joint `b + 1`. Every joint's parent has a
//! lower index, so iterating bones in index order visits parents first.
//!
//! Bone transforms `T_j` map rest-pose site coordinates of points attached to
//! bone `j` to their posed site coordinates; the identity pose is the rest pose.

mod adapt;
mod mesh;
mod skinning;
mod template;
mod tracker;

pub use adapt::{adapt_shape, adapt_to_skeleton, compute_bone_scales, scaled_joints, update_bind_transforms};
pub use mesh::RiggedHandMesh;
pub use skinning::skin_vertices;
pub use template::{generate_template_mesh, template_mesh, template_rest_joints};
pub use tracker::pose_from_tracker;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::{centroid, validate_rigid, Rigid};

pub const JOINT_COUNT: usize = 21;
pub const BONE_COUNT: usize = 20;

pub const WRIST: usize = 0;
/// Joints that sit on the (approximately rigid) palm.
pub const PALM_JOINTS: [usize; 6] = [0, 1, 5, 9, 13, 17];
pub const FINGERTIPS: [usize; 5] = [4, 8, 12, 16, 20];
/// Index finger MCP -> PIP.
pub const INDEX_PROXIMAL_BONE: usize = 5;

/// Parent joint of `joint`, `None` for the wrist.
pub const fn joint_parent(joint: usize) -> Option<usize> {
    match joint {
        0 => None,
        1 | 5 | 9 | 13 | 17 => Some(0),
        j => Some(j - 1),
    }
}

/// The canonical `(parent, child)` bone list.
pub fn canonical_bones() -> Vec<(usize, usize)> {
    (1..JOINT_COUNT)
        .map(|c| (joint_parent(c).expect("non-root"), c))
        .collect()
}

/// Bone whose child joint is `joint`, i.e. the bone that ends at it.
pub const fn bone_ending_at(joint: usize) -> Option<usize> {
    if joint == 0 {
        None
    } else {
        Some(joint - 1)
    }
}

pub(crate) fn check_topology(bones: &[(usize, usize)]) -> Result<()> {
    if bones.len() != BONE_COUNT {
        return Err(Error::Structural(format!(
            "expected {BONE_COUNT} bones, got {}",
            bones.len()
        )));
    }
    for (b, &(p, c)) in bones.iter().enumerate() {
        if c != b + 1 || joint_parent(c) != Some(p) {
            return Err(Error::Structural(format!(
                "bone {b} is ({p}, {c}), expected ({:?}, {})",
                joint_parent(b + 1),
                b + 1
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_joints(joints: &[Point3<f64>]) -> Result<()> {
    if joints.len() != JOINT_COUNT {
        return Err(Error::Structural(format!(
            "expected {JOINT_COUNT} joints, got {}",
            joints.len()
        )));
    }
    if let Some(j) = joints.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::Validation(format!("joint {j} has non-finite coordinates")));
    }
    Ok(())
}

/// A tracked or template hand skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct HandSkeleton {
    pub joints: Vec<Point3<f64>>,
    pub bones: Vec<(usize, usize)>,
    pub bone_transforms: Vec<Rigid>,
    pub timestamp_ms: i64,
}

impl HandSkeleton {
    pub fn new(joints: Vec<Point3<f64>>, bone_transforms: Vec<Rigid>, timestamp_ms: i64) -> Result<Self> {
        let s = Self {
            joints,
            bones: canonical_bones(),
            bone_transforms,
            timestamp_ms,
        };
        s.validate()?;
        Ok(s)
    }

    /// Skeleton in rest pose: every bone transform is the identity.
    pub fn at_rest(joints: Vec<Point3<f64>>, timestamp_ms: i64) -> Result<Self> {
        Self::new(joints, vec![Rigid::identity(); BONE_COUNT], timestamp_ms)
    }

    pub fn validate(&self) -> Result<()> {
        check_joints(&self.joints)?;
        check_topology(&self.bones)?;
        if self.bone_transforms.len() != BONE_COUNT {
            return Err(Error::Structural(format!(
                "expected {BONE_COUNT} bone transforms, got {}",
                self.bone_transforms.len()
            )));
        }
        for t in &self.bone_transforms {
            validate_rigid(t)?;
        }
        Ok(())
    }

    pub fn bone_length(&self, bone: usize) -> f64 {
        let (p, c) = self.bones[bone];
        (self.joints[c] - self.joints[p]).norm()
    }

    pub fn mean_joint(&self) -> Point3<f64> {
        centroid(&self.joints)
    }

    /// The skeleton re-expressed after the site-frame motion `g`.
    ///
    /// Joints are moved by `g`; bone transforms become `g * T_j`, so they still
    /// take rest-pose points (in the original frame) to posed points, now in the
    /// new frame.
    pub fn transformed(&self, g: &Rigid) -> Self {
        Self {
            joints: self.joints.iter().map(|p| g * p).collect(),
            bones: self.bones.clone(),
            bone_transforms: self.bone_transforms.iter().map(|t| g * t).collect(),
            timestamp_ms: self.timestamp_ms,
        }
    }
}

/// Per-bone uniform scale factors, all strictly positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct BoneScales(Vec<f64>);

impl BoneScales {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.len() != BONE_COUNT {
            return Err(Error::Structural(format!(
                "expected {BONE_COUNT} bone scales, got {}",
                scales.len()
            )));
        }
        if let Some(b) = scales.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Validation(format!(
                "bone {b} scale {} is not positive and finite",
                scales[b]
            )));
        }
        Ok(Self(scales))
    }

    pub fn uniform(s: f64) -> Result<Self> {
        Self::new(vec![s; BONE_COUNT])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, bone: usize) -> f64 {
        self.0[bone]
    }
}
