//! Bone-length shape adaptation of the template mesh.

use nalgebra::{Point3, Vector3};

use super::{check_joints, check_topology, BoneScales, HandSkeleton, RiggedHandMesh, BONE_COUNT};
use crate::error::{Error, Result};
use crate::geometry::{validate_rigid, Rigid};

/// Template bones shorter than this are treated as zero length.
const MIN_BONE_LENGTH: f64 = 1e-9;

/// `scale_j = |target bone j| / |template bone j|`.
pub fn compute_bone_scales(template: &HandSkeleton, target: &HandSkeleton) -> Result<BoneScales> {
    check_topology(&template.bones)?;
    check_topology(&target.bones)?;
    check_joints(&template.joints)?;
    check_joints(&target.joints)?;
    let mut scales = Vec::with_capacity(BONE_COUNT);
    for b in 0..BONE_COUNT {
        let len = template.bone_length(b);
        if len < MIN_BONE_LENGTH {
            return Err(Error::DegenerateBone { bone: b });
        }
        scales.push(target.bone_length(b) / len);
    }
    BoneScales::new(scales)
}

/// Joint positions after rescaling every bone offset, accumulated from the wrist.
pub fn scaled_joints(joints: &[Point3<f64>], bones: &[(usize, usize)], scales: &BoneScales) -> Vec<Point3<f64>> {
    let mut out = joints.to_vec();
    for (b, &(p, c)) in bones.iter().enumerate() {
        out[c] = out[p] + (joints[c] - joints[p]) * scales.get(b);
    }
    out
}

/// Rebuilds bind transforms after bone scaling.
///
/// Rotations are kept; each bind origin moves with its bone's head joint along
/// the rescaled chain.
pub fn update_bind_transforms(
    bind: &[Rigid],
    skeleton: &HandSkeleton,
    scales: &BoneScales,
) -> Result<Vec<Rigid>> {
    check_topology(&skeleton.bones)?;
    if bind.len() != BONE_COUNT {
        return Err(Error::Structural(format!(
            "expected {BONE_COUNT} bind transforms, got {}",
            bind.len()
        )));
    }
    let moved = scaled_joints(&skeleton.joints, &skeleton.bones, scales);
    Ok(bind
        .iter()
        .zip(&skeleton.bones)
        .map(|(b, &(head, _))| {
            let mut out = *b;
            out.translation.vector += moved[head] - skeleton.joints[head];
            out
        })
        .collect())
}

/// `V_i' = sum_j w_ji B_j' S_j B_j^-1 V_i`, with `S_j` a uniform scale about the
/// bone-local origin. Topology, UVs, texture and weights are unchanged; the rest
/// joints and bind transforms are replaced by their rescaled versions.
pub fn adapt_shape(mesh: &RiggedHandMesh, scales: &BoneScales, bind_updated: &[Rigid]) -> Result<RiggedHandMesh> {
    if bind_updated.len() != mesh.bone_count() || mesh.bind_transforms.len() != mesh.bone_count() {
        return Err(Error::Structural("bind transform count does not match bones".into()));
    }
    for b in mesh.bind_transforms.iter().chain(bind_updated) {
        validate_rigid(b)?;
    }
    mesh.check_weights()?;
    // B_j' S_j B_j^-1 V = R'_j (s_j R_j^T (V - t_j)) + t'_j
    let per_bone: Vec<_> = mesh
        .bind_transforms
        .iter()
        .zip(bind_updated)
        .enumerate()
        .map(|(j, (b, b2))| (b.inverse(), *b2, scales.get(j)))
        .collect();

    let rest_vertices = mesh
        .rest_vertices
        .iter()
        .zip(&mesh.skin_weights)
        .map(|(v, weights)| {
            let acc = weights.iter().fold(Vector3::zeros(), |acc, &(bone, w)| {
                let (inv, updated, s) = &per_bone[bone];
                let local = inv * v;
                let scaled = Point3::from(local.coords * *s);
                acc + (updated * scaled).coords * w
            });
            Point3::from(acc)
        })
        .collect();

    Ok(RiggedHandMesh {
        rest_vertices,
        rest_joints: scaled_joints(&mesh.rest_joints, &mesh.bones, scales),
        bind_transforms: bind_updated.to_vec(),
        ..mesh.clone()
    })
}

/// Full shape adaptation: fit bone scales to `target` and reshape the mesh.
pub fn adapt_to_skeleton(mesh: &RiggedHandMesh, target: &HandSkeleton) -> Result<RiggedHandMesh> {
    let rest = mesh.rest_skeleton()?;
    let scales = compute_bone_scales(&rest, target)?;
    let bind = update_bind_transforms(&mesh.bind_transforms, &rest, &scales)?;
    adapt_shape(mesh, &scales, &bind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton_rig::{template_mesh, template_rest_joints, INDEX_PROXIMAL_BONE, WRIST};
    use approx::assert_relative_eq;

    fn template() -> HandSkeleton {
        HandSkeleton::at_rest(template_rest_joints(), 0).unwrap()
    }

    fn dilate(joints: &[Point3<f64>], s: f64) -> Vec<Point3<f64>> {
        let w = joints[WRIST];
        joints.iter().map(|p| w + (p - w) * s).collect()
    }

    #[test]
    fn identical_skeletons_give_unit_scales() {
        let s = compute_bone_scales(&template(), &template()).unwrap();
        assert!(s.as_slice().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn doubled_skeleton_gives_scale_two() {
        let target = HandSkeleton::at_rest(dilate(&template_rest_joints(), 2.0), 0).unwrap();
        let s = compute_bone_scales(&template(), &target).unwrap();
        for v in s.as_slice() {
            assert_relative_eq!(*v, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn index_proximal_ratio() {
        let t = template();
        assert_relative_eq!(t.bone_length(INDEX_PROXIMAL_BONE), 0.040, epsilon = 1e-12);
        let mut joints = t.joints.clone();
        // Lengthen only MCP -> PIP to 0.050 m, carrying the rest of the finger along.
        let (mcp, pip) = t.bones[INDEX_PROXIMAL_BONE];
        let dir = (joints[pip] - joints[mcp]).normalize();
        let shift = dir * 0.010;
        for j in pip..=8 {
            joints[j] += shift;
        }
        let target = HandSkeleton::at_rest(joints, 0).unwrap();
        let s = compute_bone_scales(&t, &target).unwrap();
        for b in 0..BONE_COUNT {
            let expect = if b == INDEX_PROXIMAL_BONE { 1.25 } else { 1.0 };
            assert_relative_eq!(s.get(b), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_length_template_bone_is_rejected() {
        let mut joints = template_rest_joints();
        joints[12] = joints[11];
        let degenerate = HandSkeleton::at_rest(joints, 0).unwrap();
        assert!(matches!(
            compute_bone_scales(&degenerate, &template()),
            Err(Error::DegenerateBone { bone: 11 })
        ));
    }

    #[test]
    fn unit_scales_keep_bind_transforms() {
        let mesh = template_mesh();
        let b = update_bind_transforms(&mesh.bind_transforms, &template(), &BoneScales::uniform(1.0).unwrap()).unwrap();
        assert_eq!(b, mesh.bind_transforms);
    }

    #[test]
    fn uniform_scale_scales_wrist_relative_translations() {
        let mesh = template_mesh();
        let t = template();
        let b = update_bind_transforms(&mesh.bind_transforms, &t, &BoneScales::uniform(1.7).unwrap()).unwrap();
        let w = t.joints[WRIST].coords;
        // Forward kinematics oracle: each head is the wrist plus 1.7x the rest chain offset.
        for (j, (orig, new)) in mesh.bind_transforms.iter().zip(&b).enumerate() {
            let (head, _) = t.bones[j];
            let mut chain = Vector3::zeros();
            let mut k = head;
            while let Some(p) = crate::skeleton_rig::joint_parent(k) {
                chain += t.joints[k] - t.joints[p];
                k = p;
            }
            assert_relative_eq!(new.translation.vector - w, chain * 1.7, epsilon = 1e-12);
            assert_relative_eq!(new.translation.vector - w, (orig.translation.vector - w) * 1.7, epsilon = 1e-12);
            assert_eq!(new.rotation, orig.rotation);
        }
    }

    #[test]
    fn fingertip_scaling_leaves_ancestors() {
        let mesh = template_mesh();
        let mut v = vec![1.0; BONE_COUNT];
        v[7] = 1.6; // index DIP -> tip
        let b = update_bind_transforms(&mesh.bind_transforms, &template(), &BoneScales::new(v).unwrap()).unwrap();
        for j in [4, 5, 6, 7] {
            assert_eq!(b[j], mesh.bind_transforms[j]);
        }
    }

    #[test]
    fn unit_scales_leave_vertices() {
        let mesh = template_mesh();
        let s = BoneScales::uniform(1.0).unwrap();
        let out = adapt_shape(&mesh, &s, &mesh.bind_transforms).unwrap();
        let max = out
            .rest_vertices
            .iter()
            .zip(&mesh.rest_vertices)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max < 1e-9, "max displacement {max}");
        assert_eq!(out.skin_weights, mesh.skin_weights);
        assert_eq!(out.faces, mesh.faces);
    }

    fn bbox_diagonal(v: &[Point3<f64>]) -> f64 {
        let mut lo = v[0];
        let mut hi = v[0];
        for p in v {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi - lo).norm()
    }

    #[test]
    fn uniform_scale_two_doubles_bounding_box() {
        let mesh = template_mesh();
        let t = template();
        let s = BoneScales::uniform(2.0).unwrap();
        let b = update_bind_transforms(&mesh.bind_transforms, &t, &s).unwrap();
        let out = adapt_shape(&mesh, &s, &b).unwrap();
        let ratio = bbox_diagonal(&out.rest_vertices) / bbox_diagonal(&mesh.rest_vertices);
        assert!((ratio - 2.0).abs() / 2.0 < 1e-6, "ratio {ratio}");
    }

    #[test]
    fn adapted_mesh_matches_target_lengths() {
        let mesh = template_mesh();
        let mut joints = dilate(&template_rest_joints(), 1.1);
        joints[16].x += 0.004;
        joints[3].y -= 0.003;
        let target = HandSkeleton::at_rest(joints, 0).unwrap();
        let adapted = adapt_to_skeleton(&mesh, &target).unwrap();
        let again = compute_bone_scales(&adapted.rest_skeleton().unwrap(), &target).unwrap();
        for b in 0..BONE_COUNT {
            assert_relative_eq!(again.get(b), 1.0, epsilon = 1e-6);
            assert!((adapted.rest_skeleton().unwrap().bone_length(b) - target.bone_length(b)).abs() < 1e-6);
        }
        // Idempotent under unit scales.
        let twice = adapt_to_skeleton(&adapted, &target).unwrap();
        for (a, b) in twice.rest_vertices.iter().zip(&adapted.rest_vertices) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_rigid_bind_is_rejected() {
        let mut mesh = template_mesh();
        mesh.bind_transforms[0] = Rigid::from_parts(
            nalgebra::Translation3::identity(),
            nalgebra::Rotation3::from_matrix_unchecked(nalgebra::Matrix3::zeros()),
        );
        let s = BoneScales::uniform(1.0).unwrap();
        let b = template_mesh().bind_transforms;
        assert!(matches!(adapt_shape(&mesh, &s, &b), Err(Error::Validation(_))));
    }
}
