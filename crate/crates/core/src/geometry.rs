//! Rigid transforms, pinhole cameras and planes shared by every stage.
//!
//! Conventions: all lengths are meters. A site frame has its origin at the
//! screen center, `+x` to the local user's right, `+y` up and `+z` toward the
//! local user, so the screen surface is the `z = 0` plane. Camera frames follow
//! the computer-vision convention (`+x` right, `+y` down, `+z` forward) and a
//! pixel `(i, j)` covers `[i, i + 1) x [j, j + 1)` with its center at
//! `(i + 0.5, j + 0.5)`.

use nalgebra::{IsometryMatrix3, Matrix3, Point2, Point3, Rotation3, Translation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rigid transform stored as an orthonormal rotation matrix plus translation.
pub type Rigid = IsometryMatrix3<f64>;

/// Tolerance on `R^T R = I` and `det R = 1` when validating rotation blocks.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Returns true when `m` is orthonormal with determinant +1 within `tol`.
pub fn is_rotation(m: &Matrix3<f64>, tol: f64) -> bool {
    if m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let gram = m.transpose() * m;
    (gram - Matrix3::identity()).amax() <= tol && (m.determinant() - 1.0).abs() <= tol
}

/// Builds a rigid transform, rejecting rotation blocks that are not proper rotations.
pub fn rigid_from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Rigid> {
    if !is_rotation(&rotation, ROTATION_TOLERANCE) {
        return Err(Error::Validation(format!(
            "rotation block is not orthonormal with det +1: {rotation}"
        )));
    }
    if translation.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite translation".into()));
    }
    Ok(Rigid::from_parts(
        Translation3::from(translation),
        Rotation3::from_matrix_unchecked(rotation),
    ))
}

/// Checks an already-built transform; used where transforms come from files or the wire.
pub fn validate_rigid(t: &Rigid) -> Result<()> {
    rigid_from_parts(*t.rotation.matrix(), t.translation.vector).map(|_| ())
}

/// Row-major 3x3 rotation followed by the translation, the layout used in text fixtures.
pub fn rigid_to_array(t: &Rigid) -> [f64; 12] {
    let r = t.rotation.matrix();
    let p = t.translation.vector;
    [
        r[(0, 0)],
        r[(0, 1)],
        r[(0, 2)],
        r[(1, 0)],
        r[(1, 1)],
        r[(1, 2)],
        r[(2, 0)],
        r[(2, 1)],
        r[(2, 2)],
        p.x,
        p.y,
        p.z,
    ]
}

pub fn rigid_from_array(a: &[f64; 12]) -> Result<Rigid> {
    let r = Matrix3::new(a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]);
    rigid_from_parts(r, Vector3::new(a[9], a[10], a[11]))
}

/// Rotation about `axis` by `angle` radians.
pub fn rotation(axis: Vector3<f64>, angle: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
}

/// Serializable form of a rigid transform for config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidConfig {
    /// Row-major rotation matrix.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl Default for RigidConfig {
    fn default() -> Self {
        Self::from_rigid(&Rigid::identity())
    }
}

impl RigidConfig {
    pub fn from_rigid(t: &Rigid) -> Self {
        let a = rigid_to_array(t);
        let mut rotation = [0.0; 9];
        rotation.copy_from_slice(&a[..9]);
        Self {
            rotation,
            translation: [a[9], a[10], a[11]],
        }
    }

    pub fn to_rigid(&self) -> Result<Rigid> {
        let mut a = [0.0; 12];
        a[..9].copy_from_slice(&self.rotation);
        a[9..].copy_from_slice(&self.translation);
        rigid_from_array(&a)
    }
}

/// Pinhole intrinsics plus raster size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    /// Square-pixel intrinsics with the principal point at the raster center.
    pub fn centered(focal: f64, width: u32, height: u32) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }
}

/// Near-plane distance used by projection; points closer than this are rejected.
pub const NEAR_PLANE: f64 = 1e-3;

/// A calibrated pinhole camera. `pose` maps camera coordinates to the site frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub pose: Rigid,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, pose: Rigid) -> Self {
        Self { intrinsics, pose }
    }

    /// Camera at `position` looking at `target`, with image-up roughly along `up`.
    pub fn look_at(
        intrinsics: Intrinsics,
        position: Point3<f64>,
        target: Point3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self> {
        let forward = target - position;
        if forward.norm() < 1e-12 {
            return Err(Error::Configuration("camera target equals position".into()));
        }
        let z = forward.normalize();
        let x = (-up).cross(&z);
        if x.norm() < 1e-9 {
            return Err(Error::Configuration("camera up vector parallel to view".into()));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let r = Matrix3::from_columns(&[x, y, z]);
        Ok(Self::new(intrinsics, rigid_from_parts(r, position.coords)?))
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width as usize
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height as usize
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from(self.pose.translation.vector)
    }

    pub fn to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        self.pose.inverse_transform_point(p)
    }

    /// Projects a site-frame point to continuous pixel coordinates and camera depth.
    pub fn project(&self, p: &Point3<f64>) -> Option<(Point2<f64>, f64)> {
        let c = self.to_camera(p);
        if c.z <= NEAR_PLANE {
            return None;
        }
        let k = &self.intrinsics;
        Some((
            Point2::new(k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy),
            c.z,
        ))
    }

    /// Site-frame point at camera depth `depth` along pixel position `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Point3<f64> {
        let k = &self.intrinsics;
        let c = Point3::new((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth);
        self.pose.transform_point(&c)
    }

    /// Unit ray direction (site frame) through pixel position `(u, v)`.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        let d = Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        (self.pose.rotation * d).normalize()
    }

    /// The same camera moved by the rigid motion `t` (applied in the site frame).
    pub fn transformed(&self, t: &Rigid) -> Self {
        Self::new(self.intrinsics, t * self.pose)
    }
}

/// Oriented plane `{x : n . (x - origin) = 0}` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub origin: Point3<f64>,
    pub normal: Vector3<f64>,
}

impl Plane {
    pub fn new(origin: Point3<f64>, normal: Vector3<f64>) -> Self {
        Self {
            origin,
            normal: normal.normalize(),
        }
    }

    /// The `z = 0` screen plane of a site frame, normal toward the user.
    pub fn screen() -> Self {
        Self::new(Point3::origin(), Vector3::z())
    }

    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&(p - self.origin))
    }
}

/// Mean of a non-empty point list.
pub fn centroid(points: &[Point3<f64>]) -> Point3<f64> {
    let sum = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / points.len().max(1) as f64)
}
