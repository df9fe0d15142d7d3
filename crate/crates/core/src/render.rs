//! Unlit z-buffered triangle rasterizer.
//!
//! Used for the posed mesh hand, the synthetic RGBD captures and the
//! ground-truth silhouettes. Texture lookup is nearest-texel with no lighting,
//! so every rendered color is exactly a texel color.

use nalgebra::Point3;

use crate::geometry::NEAR_PLANE;
use crate::raster::{LayerImage, RgbImage};

/// Borrowed textured triangle mesh in site coordinates.
#[derive(Debug, Clone, Copy)]
pub struct MeshView<'a> {
    pub positions: &'a [Point3<f64>],
    pub faces: &'a [[u32; 3]],
    pub uvs: &'a [[f32; 2]],
    pub texture: &'a RgbImage,
}

/// Opaque display panel: the `z = 0` rectangle `|x| <= half_width, |y| <= half_height`.
///
/// Cameras mounted around the display cannot see through it, which is what
/// hides a hand pressed against the screen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenOccluder {
    pub half_width: f64,
    pub half_height: f64,
}

impl ScreenOccluder {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            half_width: width / 2.0,
            half_height: height / 2.0,
        }
    }

    /// True when the open segment from `eye` to `p` crosses the panel.
    pub fn blocks(&self, eye: &Point3<f64>, p: &Point3<f64>) -> bool {
        if (eye.z < 0.0) == (p.z < 0.0) || eye.z == p.z {
            return false;
        }
        let t = eye.z / (eye.z - p.z);
        if t <= 0.0 || t >= 1.0 {
            return false;
        }
        let x = eye.x + t * (p.x - eye.x);
        let y = eye.y + t * (p.y - eye.y);
        x.abs() <= self.half_width && y.abs() <= self.half_height
    }
}

/// Draws `mesh` into `layer` with a less-than depth test. Covered pixels get alpha 1.
pub fn rasterize(layer: &mut LayerImage, mesh: &MeshView<'_>, occluder: Option<&ScreenOccluder>) {
    let cam = layer.camera;
    let k = cam.intrinsics;
    let eye = cam.center();
    let projected: Vec<[f64; 3]> = mesh
        .positions
        .iter()
        .map(|p| {
            let c = cam.to_camera(p);
            if c.z <= NEAR_PLANE {
                [f64::NAN, f64::NAN, c.z]
            } else {
                [k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy, c.z]
            }
        })
        .collect();

    let (w, h) = (layer.width as i64, layer.height as i64);
    for face in mesh.faces {
        let [i0, i1, i2] = face.map(|i| i as usize);
        let (a, b, c) = (projected[i0], projected[i1], projected[i2]);
        if a[2] <= NEAR_PLANE || b[2] <= NEAR_PLANE || c[2] <= NEAR_PLANE {
            continue;
        }
        let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if area.abs() < 1e-12 {
            continue;
        }
        let min_x = (a[0].min(b[0]).min(c[0]) - 0.5).ceil().max(0.0) as i64;
        let max_x = ((a[0].max(b[0]).max(c[0]) - 0.5).floor() as i64).min(w - 1);
        let min_y = (a[1].min(b[1]).min(c[1]) - 0.5).ceil().max(0.0) as i64;
        let max_y = ((a[1].max(b[1]).max(c[1]) - 0.5).floor() as i64).min(h - 1);
        if min_x > max_x || min_y > max_y {
            continue;
        }
        let inv_area = 1.0 / area;
        let (uv0, uv1, uv2) = (mesh.uvs[i0], mesh.uvs[i1], mesh.uvs[i2]);
        let (iz0, iz1, iz2) = (1.0 / a[2], 1.0 / b[2], 1.0 / c[2]);

        for py in min_y..=max_y {
            let sy = py as f64 + 0.5;
            for px in min_x..=max_x {
                let sx = px as f64 + 0.5;
                let w0 = ((b[0] - sx) * (c[1] - sy) - (b[1] - sy) * (c[0] - sx)) * inv_area;
                let w1 = ((c[0] - sx) * (a[1] - sy) - (c[1] - sy) * (a[0] - sx)) * inv_area;
                let w2 = 1.0 - w0 - w1;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let p0 = w0 * iz0;
                let p1 = w1 * iz1;
                let p2 = w2 * iz2;
                let z = 1.0 / (p0 + p1 + p2);
                let idx = (py * w + px) as usize;
                if z as f32 >= layer.depth[idx] {
                    continue;
                }
                if let Some(occ) = occluder {
                    if occ.blocks(&eye, &cam.unproject(sx, sy, z)) {
                        continue;
                    }
                }
                let u = ((p0 * uv0[0] as f64 + p1 * uv1[0] as f64 + p2 * uv2[0] as f64) * z) as f32;
                let v = ((p0 * uv0[1] as f64 + p1 * uv1[1] as f64 + p2 * uv2[1] as f64) * z) as f32;
                let t = mesh.texture.sample_nearest(u, v);
                layer.rgba[idx] = [t[0], t[1], t[2], 1.0];
                layer.depth[idx] = z as f32;
            }
        }
    }
}
