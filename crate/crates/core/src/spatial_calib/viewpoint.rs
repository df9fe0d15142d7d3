use nalgebra::{Matrix3, Point2, Point3, Vector3};

use super::Viewpoint;
use crate::error::{Error, Result};
use crate::geometry::Camera;

/// Rays closer to parallel than this cannot locate a point.
pub const MIN_RAY_ANGLE_DEG: f64 = 1.0;

/// One camera's pixel observation of both eyes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeObservation {
    pub camera: Camera,
    pub left: Point2<f64>,
    pub right: Point2<f64>,
}

/// Point minimizing the summed squared distance to all rays `(origin, direction)`.
///
/// For two rays this is the midpoint of their closest approach.
pub fn triangulate(rays: &[(Point3<f64>, Vector3<f64>)]) -> Result<Point3<f64>> {
    if rays.len() < 2 {
        return Err(Error::Underdetermined(format!(
            "need rays from at least 2 cameras, got {}",
            rays.len()
        )));
    }
    let max_angle = rays
        .iter()
        .enumerate()
        .flat_map(|(i, a)| rays[i + 1..].iter().map(move |b| a.1.normalize().dot(&b.1.normalize()).clamp(-1.0, 1.0).acos()))
        .fold(0.0, f64::max);
    if max_angle < MIN_RAY_ANGLE_DEG.to_radians() {
        return Err(Error::IllConditioned(format!(
            "rays span only {:.4} degrees",
            max_angle.to_degrees()
        )));
    }
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for (o, d) in rays {
        let d = d.normalize();
        let m = Matrix3::identity() - d * d.transpose();
        a += m;
        b += m * o.coords;
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::IllConditioned("ray system is singular".into()))?;
    Ok(Point3::from(x))
}

/// Triangulates both eyes and returns their midpoint.
pub fn compute_viewpoint(observations: &[EyeObservation], timestamp_ms: i64) -> Result<Viewpoint> {
    if observations.len() < 2 {
        return Err(Error::Underdetermined(format!(
            "viewpoint needs at least 2 observing cameras, got {}",
            observations.len()
        )));
    }
    let rays = |pick: fn(&EyeObservation) -> Point2<f64>| -> Vec<_> {
        observations
            .iter()
            .map(|o| {
                let px = pick(o);
                (o.camera.center(), o.camera.ray_direction(px.x, px.y))
            })
            .collect()
    };
    let left = triangulate(&rays(|o| o.left))?;
    let right = triangulate(&rays(|o| o.right))?;
    Ok(Viewpoint {
        position: nalgebra::center(&left, &right),
        timestamp_ms,
    })
}

/// Synthetic eye detections: projects both eyes into every camera that sees them.
pub fn observe_eyes(cameras: &[Camera], left: &Point3<f64>, right: &Point3<f64>) -> Vec<EyeObservation> {
    cameras
        .iter()
        .filter_map(|cam| {
            let (l, _) = cam.project(left)?;
            let (r, _) = cam.project(right)?;
            Some(EyeObservation {
                camera: *cam,
                left: l,
                right: r,
            })
        })
        .collect()
}
