//! Procedurally generated low-poly template hand (right hand, rest pose).
//!
//! Rest pose: wrist at the origin, fingers along `+y`, thumb toward `-x`, palm
//! facing `-z`. All joints lie in the `z = 0` plane. The shipped fixture
//! `fixtures/hand_template.mesh` is the text serialization of
//! [`generate_template_mesh`]; set `TOUCHLINK_REGEN_FIXTURE=1` when running the
//! tests to rewrite it after changing the generator.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use nalgebra::{Matrix3, Point3, Vector3};

use super::{bone_ending_at, canonical_bones, RiggedHandMesh, BONE_COUNT, WRIST};
use crate::geometry::{rigid_from_parts, Rigid};
use crate::raster::RgbImage;

const FIXTURE: &str = include_str!("../../fixtures/hand_template.mesh");

/// Template rest joints in meters (medium adult hand).
pub fn template_rest_joints() -> Vec<Point3<f64>> {
    [
        [0.0, 0.0],
        // thumb
        [-0.025, 0.020],
        [-0.045, 0.045],
        [-0.060, 0.075],
        [-0.072, 0.100],
        // index
        [-0.025, 0.090],
        [-0.025, 0.130],
        [-0.025, 0.155],
        [-0.025, 0.175],
        // middle
        [-0.005, 0.095],
        [-0.005, 0.140],
        [-0.005, 0.168],
        [-0.005, 0.190],
        // ring
        [0.015, 0.090],
        [0.015, 0.130],
        [0.015, 0.155],
        [0.015, 0.176],
        // pinky
        [0.033, 0.080],
        [0.035, 0.110],
        [0.036, 0.128],
        [0.037, 0.145],
    ]
    .iter()
    .map(|p| Point3::new(p[0], p[1], 0.0))
    .collect()
}

/// The shipped template mesh (parsed once from the fixture file).
pub fn template_mesh() -> RiggedHandMesh {
    static MESH: OnceLock<RiggedHandMesh> = OnceLock::new();
    MESH.get_or_init(|| RiggedHandMesh::from_text(FIXTURE).expect("bundled hand fixture is valid"))
        .clone()
}

const RADIAL: usize = 12;
const RINGS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const PALM_GRID: usize = 7;
const PALM_HALF_THICKNESS: f64 = 0.011;
/// Wrist-to-MCP bones; the palm plate covers them, so they get no tube.
const PALM_BONES: [usize; 4] = [4, 8, 12, 16];

fn tube_radius(bone: usize) -> f64 {
    match bone {
        0 => 0.013,
        1 => 0.011,
        2 => 0.010,
        3 => 0.009,
        b => match (b - 4) % 4 {
            1 => 0.0095,
            2 => 0.0085,
            _ => 0.0075,
        },
    }
}

/// Bone frame: origin at the head joint, `x` along the bone, `z` toward the palm side.
fn bind_frame(head: &Point3<f64>, child: &Point3<f64>) -> Rigid {
    let x = (child - head).normalize();
    let palm = Vector3::new(0.0, 0.0, -1.0);
    let z = (palm - x * x.dot(&palm)).normalize();
    let y = z.cross(&x);
    rigid_from_parts(Matrix3::from_columns(&[x, y, z]), head.coords).expect("orthonormal frame")
}

fn skin_texture() -> RgbImage {
    let base = [0.72f64, 0.47, 0.37];
    RgbImage::from_fn(64, 64, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let f1 = 0.07 * (0.45 * x + 0.3).sin() * (0.38 * y).cos();
        let f2 = 0.04 * (0.9 * x + 1.3 * y).sin();
        let chroma = 0.03 * (0.6 * x - 0.8 * y + 0.5).cos();
        [
            (base[0] * (1.0 + f1 + f2 + chroma)) as f32,
            (base[1] * (1.0 + f1 + 0.5 * f2 - chroma)) as f32,
            (base[2] * (1.0 + 0.6 * f1 + 1.2 * f2 + 0.5 * chroma)) as f32,
        ]
    })
}

/// Builds the template mesh from scratch (~1k vertices).
pub fn generate_template_mesh() -> RiggedHandMesh {
    let joints = template_rest_joints();
    let bones = canonical_bones();
    let bind: Vec<Rigid> = bones
        .iter()
        .map(|&(h, c)| bind_frame(&joints[h], &joints[c]))
        .collect();

    let mut verts = Vec::new();
    let mut uvs = Vec::new();
    let mut weights: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut faces = Vec::new();

    let tubes: Vec<usize> = (0..BONE_COUNT).filter(|b| !PALM_BONES.contains(b)).collect();
    for (slot, &b) in tubes.iter().enumerate() {
        let (head, child) = bones[b];
        let len = (joints[child] - joints[head]).norm();
        let r0 = tube_radius(b);
        let parent_bone = if head == WRIST { None } else { bone_ending_at(head) };
        let first = verts.len() as u32;
        for (ri, &t) in RINGS.iter().enumerate() {
            let r = r0 * (1.0 - 0.1 * t);
            let row: Vec<(usize, f64)> = match parent_bone {
                Some(pb) if t < 0.5 => vec![(b, 0.5 + t), (pb, 0.5 - t)],
                _ => vec![(b, 1.0)],
            };
            for k in 0..RADIAL {
                let th = TAU * k as f64 / RADIAL as f64;
                let local = Point3::new(t * len, r * th.cos(), r * th.sin());
                verts.push(bind[b] * local);
                uvs.push([
                    ((slot as f64 + 0.1 + 0.8 * k as f64 / RADIAL as f64) / tubes.len() as f64) as f32,
                    (0.05 + 0.55 * t) as f32,
                ]);
                weights.push(row.clone());
            }
            if ri > 0 {
                let a0 = first + ((ri - 1) * RADIAL) as u32;
                let b0 = first + (ri * RADIAL) as u32;
                for k in 0..RADIAL as u32 {
                    let k1 = (k + 1) % RADIAL as u32;
                    faces.push([a0 + k, a0 + k1, b0 + k1]);
                    faces.push([a0 + k, b0 + k1, b0 + k]);
                }
            }
        }
        // Rounded cap past the tail of fingertip bones.
        if super::FINGERTIPS.contains(&child) {
            let tip = verts.len() as u32;
            verts.push(bind[b] * Point3::new(len + 0.9 * r0, 0.0, 0.0));
            uvs.push([((slot as f64 + 0.5) / tubes.len() as f64) as f32, 0.62]);
            weights.push(vec![(b, 1.0)]);
            let last = first + ((RINGS.len() - 1) * RADIAL) as u32;
            for k in 0..RADIAL as u32 {
                faces.push([last + k, last + (k + 1) % RADIAL as u32, tip]);
            }
        }
    }

    // Palm plate: bilinear patch between the wrist line and the knuckle line,
    // thickened along z, with side walls around the boundary.
    let corners = [
        Point3::new(-0.036, -0.012, 0.0),
        Point3::new(0.030, -0.012, 0.0),
        Point3::new(0.044, 0.084, 0.0),
        Point3::new(-0.034, 0.095, 0.0),
    ];
    let n = PALM_GRID;
    let mut side_index = [[0u32; PALM_GRID * PALM_GRID]; 2];
    for (side, z) in [-PALM_HALF_THICKNESS, PALM_HALF_THICKNESS].into_iter().enumerate() {
        for j in 0..n {
            for i in 0..n {
                let s = i as f64 / (n - 1) as f64;
                let t = j as f64 / (n - 1) as f64;
                let bottom = corners[0].coords.lerp(&corners[1].coords, s);
                let top = corners[3].coords.lerp(&corners[2].coords, s);
                let mut p = Point3::from(bottom.lerp(&top, t));
                p.z = z;
                side_index[side][j * n + i] = verts.len() as u32;
                verts.push(p);
                uvs.push([(0.05 + 0.9 * s) as f32, (0.68 + 0.3 * t) as f32]);
                weights.push(palm_weights(s));
            }
        }
        let idx = &side_index[side];
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let a = idx[j * n + i];
                let b = idx[j * n + i + 1];
                let c = idx[(j + 1) * n + i + 1];
                let d = idx[(j + 1) * n + i];
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
    }
    let boundary: Vec<usize> = (0..n)
        .map(|i| i)
        .chain((1..n).map(|j| j * n + n - 1))
        .chain((0..n - 1).rev().map(|i| (n - 1) * n + i))
        .chain((1..n - 1).rev().map(|j| j * n))
        .collect();
    for w in 0..boundary.len() {
        let (p, q) = (boundary[w], boundary[(w + 1) % boundary.len()]);
        let (f0, f1) = (side_index[0][p], side_index[0][q]);
        let (b0, b1) = (side_index[1][p], side_index[1][q]);
        faces.push([f0, f1, b1]);
        faces.push([f0, b1, b0]);
    }

    RiggedHandMesh {
        rest_vertices: verts,
        faces,
        uvs,
        texture: skin_texture(),
        skin_weights: weights,
        bones,
        rest_joints: joints,
        bind_transforms: bind,
    }
}

/// Hat-function blend across the four palm bones, index side at `s = 0`.
fn palm_weights(s: f64) -> Vec<(usize, f64)> {
    let x = s * (PALM_BONES.len() - 1) as f64;
    let i = (x.floor() as usize).min(PALM_BONES.len() - 2);
    let f = x - i as f64;
    let mut row = vec![(PALM_BONES[i], 1.0 - f)];
    if f > 0.0 {
        row.push((PALM_BONES[i + 1], f));
    }
    row
}
