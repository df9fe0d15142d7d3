use nalgebra::{Point3, Vector3};

use super::{HandSkeleton, RiggedHandMesh};
use crate::error::{Error, Result};

/// Linear blend skinning: `V_i' = sum_j w_ji T_j V_i`.
pub fn skin_vertices(mesh: &RiggedHandMesh, pose: &HandSkeleton) -> Result<Vec<Point3<f64>>> {
    if pose.bone_transforms.len() != mesh.bone_count() || pose.bones != mesh.bones {
        return Err(Error::Structural(format!(
            "pose has {} bones, mesh has {}",
            pose.bone_transforms.len(),
            mesh.bone_count()
        )));
    }
    mesh.check_weights()?;
    Ok(mesh
        .rest_vertices
        .iter()
        .zip(&mesh.skin_weights)
        .map(|(v, weights)| {
            let acc = weights.iter().fold(Vector3::zeros(), |acc, &(bone, w)| {
                acc + (pose.bone_transforms[bone] * v).coords * w
            });
            Point3::from(acc)
        })
        .collect())
}
