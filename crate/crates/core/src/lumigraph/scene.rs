//! Synthetic capture fixtures: textured meshes rasterized from each rig camera.

use nalgebra::{Point3, Vector3};

use super::CaptureRig;
use crate::error::Result;
use crate::geometry::Camera;
use crate::raster::{LayerImage, RgbImage};
use crate::render::{rasterize, MeshView, ScreenOccluder};

/// Owned textured triangle mesh in site coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneMesh {
    pub positions: Vec<Point3<f64>>,
    pub faces: Vec<[u32; 3]>,
    pub uvs: Vec<[f32; 2]>,
    pub texture: RgbImage,
}

impl SceneMesh {
    pub fn view(&self) -> MeshView<'_> {
        MeshView {
            positions: &self.positions,
            faces: &self.faces,
            uvs: &self.uvs,
            texture: &self.texture,
        }
    }

    /// Rectangle parallel to the screen, centered at `center`.
    pub fn quad(center: Point3<f64>, width: f64, height: f64, texture: RgbImage) -> Self {
        let (hw, hh) = (width / 2.0, height / 2.0);
        let offsets = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)];
        Self {
            positions: offsets
                .iter()
                .map(|&(x, y)| center + Vector3::new(x, y, 0.0))
                .collect(),
            faces: vec![[0, 1, 2], [0, 2, 3]],
            uvs: vec![[0.0, 1.0], [1.0, 1.0], [1.0, 0.0], [0.0, 0.0]],
            texture,
        }
    }
}

/// Collection of opaque meshes in front of the display.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    pub meshes: Vec<SceneMesh>,
}

impl Scene {
    /// One matted RGBD capture. With an occluder, surfaces hidden by the panel are missing.
    pub fn capture(&self, camera: &Camera, occluder: Option<&ScreenOccluder>) -> LayerImage {
        let mut layer = LayerImage::empty(*camera);
        for m in &self.meshes {
            rasterize(&mut layer, &m.view(), occluder);
        }
        layer
    }

    pub fn capture_rig(&self, cameras: &[Camera], occluder: Option<&ScreenOccluder>) -> Result<CaptureRig> {
        CaptureRig::new(
            cameras.to_vec(),
            cameras.iter().map(|c| self.capture(c, occluder)).collect(),
        )
    }

    /// A 0.24 x 0.20 m "hand" card at 0.3 m in front of a 0.8 x 0.6 m "body" card at 0.7 m.
    pub fn two_planes() -> Self {
        Self {
            meshes: vec![
                SceneMesh::quad(Point3::new(0.05, 0.0, 0.3), 0.24, 0.20, stripes([0.85, 0.6, 0.5], [0.7, 0.45, 0.38])),
                SceneMesh::quad(Point3::new(0.0, -0.05, 0.7), 0.8, 0.6, checker([0.2, 0.3, 0.6], [0.35, 0.45, 0.75])),
            ],
        }
    }

    /// Torso card standing in for the participant behind their hand.
    pub fn body() -> SceneMesh {
        SceneMesh::quad(Point3::new(0.0, -0.05, 0.75), 0.6, 0.7, checker([0.2, 0.3, 0.6], [0.3, 0.4, 0.7]))
    }
}

/// Vertical two-tone stripes, 8 per texture width.
pub fn stripes(a: [f32; 3], b: [f32; 3]) -> RgbImage {
    RgbImage::from_fn(32, 32, |x, _| if (x / 4) % 2 == 0 { a } else { b })
}

/// 8 x 8 checkerboard.
pub fn checker(a: [f32; 3], b: [f32; 3]) -> RgbImage {
    RgbImage::from_fn(32, 32, |x, y| if (x / 4 + y / 4) % 2 == 0 { a } else { b })
}
