//! Deterministic unstructured-lumigraph portrait renderer.
//!
//! A per-view geometry proxy is built by forward-splatting every source depth
//! map into the target view and keeping the nearest depth. Each source image is
//! then warped onto that proxy with an occlusion test, and the warps are blended
//! with angular weights `exp(-θ / θ0)`.

mod scene;

pub use scene::{checker, stripes, Scene, SceneMesh};

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Camera, Intrinsics};
use crate::raster::{depth_valid, LayerImage, NO_DEPTH};
use crate::spatial_calib::ScreenGeometry;

/// A source sample closer than the proxy point by more than this occludes it.
pub const OCCLUSION_TOLERANCE: f64 = 0.02;
pub const BLEND_THETA0_DEG: f64 = 20.0;
pub const DEFAULT_WIDTH: u32 = 320;
pub const DEFAULT_HEIGHT: u32 = 240;
pub const DEFAULT_RIG_FOCAL: f64 = 200.0;
/// Source cameras sit this far behind the panel plane, just outside its border.
const RIG_SETBACK: f64 = 0.02;
const RIG_MARGIN: f64 = 0.06;
/// Cameras dropped on the touching hand's side during a touch phase.
pub const TOUCH_DROPPED_CAMERAS: usize = 2;

/// Calibrated source cameras and one synchronized set of matted RGBD frames.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureRig {
    pub cameras: Vec<Camera>,
    pub frames: Vec<LayerImage>,
}

impl CaptureRig {
    pub fn new(cameras: Vec<Camera>, frames: Vec<LayerImage>) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::Structural("capture rig has no cameras".into()));
        }
        if cameras.len() != frames.len() {
            return Err(Error::Structural(format!(
                "{} cameras but {} frames",
                cameras.len(),
                frames.len()
            )));
        }
        for (i, (c, f)) in cameras.iter().zip(&frames).enumerate() {
            if f.camera != *c || f.width != c.width() || f.height != c.height() {
                return Err(Error::Structural(format!("frame {i} does not match its camera")));
            }
        }
        Ok(Self { cameras, frames })
    }

    /// The same frames restricted to the cameras at `keep`.
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        Self::new(
            keep.iter().map(|&i| self.cameras[i]).collect(),
            keep.iter().map(|&i| self.frames[i].clone()).collect(),
        )
    }
}

/// Six cameras around the display border (corners and edge centers, top and
/// bottom) aimed at a seated user 0.7 m in front of the screen.
pub fn default_rig_cameras(screen: &ScreenGeometry) -> Vec<Camera> {
    let k = Intrinsics::centered(DEFAULT_RIG_FOCAL, DEFAULT_WIDTH, DEFAULT_HEIGHT);
    let (x, y) = (screen.width / 2.0 + RIG_MARGIN, screen.height / 2.0 + RIG_MARGIN / 4.0);
    let target = screen.from_screen(&Point3::new(0.0, 0.0, crate::spatial_calib::DEFAULT_VIEW_DISTANCE));
    let up = screen.pose.rotation * Vector3::y();
    [(-x, y), (0.0, y), (x, y), (-x, -y), (0.0, -y), (x, -y)]
        .iter()
        .map(|&(px, py)| {
            let pos = screen.from_screen(&Point3::new(px, py, -RIG_SETBACK));
            Camera::look_at(k, pos, target, up).expect("rig cameras are well posed")
        })
        .collect()
}

/// Indices of cameras used while a hand at `hand` (site frame) is touching:
/// all but the [`TOUCH_DROPPED_CAMERAS`] nearest to it on the screen plane.
pub fn touch_camera_subset(cameras: &[Camera], screen: &ScreenGeometry, hand: &Point3<f64>) -> Vec<usize> {
    let h = screen.to_screen(hand);
    let mut order: Vec<(f64, usize)> = cameras
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let p = screen.to_screen(&c.center());
            (((p.x - h.x).powi(2) + (p.y - h.y).powi(2)), i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let drop = TOUCH_DROPPED_CAMERAS.min(cameras.len().saturating_sub(2));
    let mut keep: Vec<usize> = order[drop..].iter().map(|&(_, i)| i).collect();
    keep.sort_unstable();
    keep
}

/// Per-pixel camera depth seen from `camera`; [`NO_DEPTH`] where empty.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub camera: Camera,
    pub depth: Vec<f32>,
}

impl DepthMap {
    pub fn empty(camera: Camera) -> Self {
        Self {
            camera,
            depth: vec![NO_DEPTH; camera.width() * camera.height()],
        }
    }

    pub fn width(&self) -> usize {
        self.camera.width()
    }

    pub fn height(&self) -> usize {
        self.camera.height()
    }

    fn min_with(mut self, other: &DepthMap) -> Self {
        for (a, b) in self.depth.iter_mut().zip(&other.depth) {
            *a = a.min(*b);
        }
        self
    }
}

/// Splats one source view into `target`, keeping per-pixel minimum depth.
fn splat_source(frame: &LayerImage, target: &Camera) -> DepthMap {
    let mut out = DepthMap::empty(*target);
    let (tw, th) = (target.width() as i64, target.height() as i64);
    let fs = frame.camera.intrinsics.fx.max(frame.camera.intrinsics.fy);
    let ft = target.intrinsics.fx.max(target.intrinsics.fy);
    for y in 0..frame.height {
        for x in 0..frame.width {
            let i = frame.index(x, y);
            let zs = frame.depth[i];
            if frame.rgba[i][3] <= 0.0 || !depth_valid(zs) {
                continue;
            }
            let p = frame.camera.unproject(x as f64 + 0.5, y as f64 + 0.5, zs as f64);
            let Some((uv, zt)) = target.project(&p) else {
                continue;
            };
            let scale = (zs as f64 / fs) * (ft / zt);
            let hs = 0.5 * scale + 0.25;
            let x0 = ((uv.x - hs - 0.5).ceil() as i64).max(0);
            let x1 = ((uv.x + hs - 0.5).floor() as i64).min(tw - 1);
            let y0 = ((uv.y - hs - 0.5).ceil() as i64).max(0);
            let y1 = ((uv.y + hs - 0.5).floor() as i64).min(th - 1);
            let z = zt as f32;
            for ty in y0..=y1 {
                for tx in x0..=x1 {
                    let d = &mut out.depth[(ty * tw + tx) as usize];
                    if z < *d {
                        *d = z;
                    }
                }
            }
        }
    }
    out
}

/// Geometry proxy: minimum over all sources of their depths reprojected into `target`.
pub fn fuse_depth_min(rig: &CaptureRig, target: &Camera) -> Result<DepthMap> {
    if rig.frames.is_empty() {
        return Err(Error::Structural("depth fusion needs at least one source view".into()));
    }
    Ok(rig
        .frames
        .par_iter()
        .map(|f| splat_source(f, target))
        .collect::<Vec<_>>()
        .iter()
        .fold(DepthMap::empty(*target), |acc, m| acc.min_with(m)))
}

/// Resamples `source` onto the proxy surface as seen from `proxy.camera`.
///
/// Colors are sampled bilinearly with premultiplied alpha. Pixels whose proxy
/// point is hidden in the source, or falls outside it, get alpha 0.
pub fn warp_view(source: &LayerImage, proxy: &DepthMap) -> LayerImage {
    let target = proxy.camera;
    let mut out = LayerImage::empty(target);
    let (sw, sh) = (source.width as i64, source.height as i64);
    for y in 0..out.height {
        for x in 0..out.width {
            let i = out.index(x, y);
            let zt = proxy.depth[i];
            if !depth_valid(zt) {
                continue;
            }
            out.depth[i] = zt;
            let p = target.unproject(x as f64 + 0.5, y as f64 + 0.5, zt as f64);
            let Some((uv, zs)) = source.camera.project(&p) else {
                continue;
            };
            let (nx, ny) = (uv.x.floor() as i64, uv.y.floor() as i64);
            if nx < 0 || ny < 0 || nx >= sw || ny >= sh {
                continue;
            }
            let seen = source.depth[(ny * sw + nx) as usize];
            if depth_valid(seen) && (seen as f64) < zs - OCCLUSION_TOLERANCE {
                continue;
            }
            let (fx, fy) = (uv.x - 0.5, uv.y - 0.5);
            let (x0, y0) = (fx.floor() as i64, fy.floor() as i64);
            let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
            let mut acc = [0.0f64; 4];
            for (dx, dy, w) in [
                (0, 0, (1.0 - tx) * (1.0 - ty)),
                (1, 0, tx * (1.0 - ty)),
                (0, 1, (1.0 - tx) * ty),
                (1, 1, tx * ty),
            ] {
                let (sx, sy) = ((x0 + dx).clamp(0, sw - 1), (y0 + dy).clamp(0, sh - 1));
                let s = source.rgba[(sy * sw + sx) as usize];
                let a = s[3] as f64 * w;
                acc[0] += s[0] as f64 * a;
                acc[1] += s[1] as f64 * a;
                acc[2] += s[2] as f64 * a;
                acc[3] += a;
            }
            if acc[3] > 0.0 {
                out.rgba[i] = [
                    (acc[0] / acc[3]) as f32,
                    (acc[1] / acc[3]) as f32,
                    (acc[2] / acc[3]) as f32,
                    acc[3].min(1.0) as f32,
                ];
            }
        }
    }
    out
}

/// Angular blend weight for a source ray at angle `theta` (radians) from the target ray.
pub fn blend_weight(theta: f64) -> f64 {
    (-theta / BLEND_THETA0_DEG.to_radians()).exp()
}

/// Normalized blend of warped layers; alpha is the largest contributing alpha.
pub fn blend_ulr(warped: &[LayerImage], proxy: &DepthMap, source_cameras: &[Camera]) -> Result<LayerImage> {
    if warped.is_empty() || warped.len() != source_cameras.len() {
        return Err(Error::Structural(format!(
            "{} warped layers for {} source cameras",
            warped.len(),
            source_cameras.len()
        )));
    }
    let target = proxy.camera;
    let eye = target.center();
    let centers: Vec<Point3<f64>> = source_cameras.iter().map(|c| c.center()).collect();
    let mut out = LayerImage::empty(target);
    for y in 0..out.height {
        for x in 0..out.width {
            let i = out.index(x, y);
            let zt = proxy.depth[i];
            if !depth_valid(zt) {
                continue;
            }
            out.depth[i] = zt;
            let p = target.unproject(x as f64 + 0.5, y as f64 + 0.5, zt as f64);
            let to_eye = p - eye;
            let mut sum_w = 0.0;
            let mut color = [0.0f64; 3];
            let mut alpha = 0.0f32;
            for (layer, c) in warped.iter().zip(&centers) {
                let s = layer.rgba[i];
                if s[3] <= 0.0 {
                    continue;
                }
                let w = blend_weight(to_eye.angle(&(p - c)));
                sum_w += w;
                for k in 0..3 {
                    color[k] += w * s[k] as f64;
                }
                alpha = alpha.max(s[3]);
            }
            if sum_w > 0.0 {
                out.rgba[i] = [
                    (color[0] / sum_w) as f32,
                    (color[1] / sum_w) as f32,
                    (color[2] / sum_w) as f32,
                    alpha,
                ];
            }
        }
    }
    Ok(out)
}

/// Image-based portrait `I_i` with depth `D_i` at `target`.
pub fn render_portrait(rig: &CaptureRig, target: &Camera) -> Result<LayerImage> {
    let proxy = fuse_depth_min(rig, target)?;
    let warped: Vec<LayerImage> = rig.frames.par_iter().map(|f| warp_view(f, &proxy)).collect();
    blend_ulr(&warped, &proxy, &rig.cameras)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rigid;
    use crate::raster::RgbImage;
    use nalgebra::{Matrix3, Rotation3, Translation3};

    /// Camera at the screen center looking at the user (+z).
    fn frontal(w: u32, h: u32) -> Camera {
        Camera::new(
            Intrinsics::centered(150.0, w, h),
            Rigid::from_parts(
                Translation3::identity(),
                Rotation3::from_matrix_unchecked(Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0))),
            ),
        )
    }

    fn flat_layer(cam: Camera, color: [f32; 3], depth: f32) -> LayerImage {
        let mut l = LayerImage::empty(cam);
        l.rgba.fill([color[0], color[1], color[2], 1.0]);
        l.depth.fill(depth);
        l
    }

    #[test]
    fn single_identical_source_reproduces_depth() {
        let cam = frontal(64, 48);
        let frame = Scene::two_planes().capture(&cam, None);
        let rig = CaptureRig::new(vec![cam], vec![frame.clone()]).unwrap();
        let fused = fuse_depth_min(&rig, &cam).unwrap();
        for (i, d) in fused.depth.iter().enumerate() {
            if frame.rgba[i][3] > 0.0 {
                assert!((d - frame.depth[i]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn min_of_two_sources() {
        let cam = frontal(16, 12);
        let near = flat_layer(cam, [1.0; 3], 1.0);
        let far = flat_layer(cam, [0.0; 3], 1.2);
        let rig = CaptureRig::new(vec![cam, cam], vec![far, near]).unwrap();
        let fused = fuse_depth_min(&rig, &cam).unwrap();
        assert!(fused.depth.iter().all(|d| (d - 1.0).abs() < 1e-6));
    }

    #[test]
    fn no_sources_is_structural() {
        assert!(CaptureRig::new(vec![], vec![]).is_err());
    }

    #[test]
    fn identity_warp_reproduces_source() {
        let cam = frontal(64, 48);
        let frame = Scene::two_planes().capture(&cam, None);
        let rig = CaptureRig::new(vec![cam], vec![frame.clone()]).unwrap();
        let proxy = fuse_depth_min(&rig, &cam).unwrap();
        let w = warp_view(&frame, &proxy);
        for i in 0..w.len() {
            if depth_valid(proxy.depth[i]) {
                for c in 0..4 {
                    assert!((w.rgba[i][c] - frame.rgba[i][c]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn occluded_proxy_point_gets_zero_alpha() {
        let cam = frontal(16, 12);
        let near = flat_layer(cam, [1.0; 3], 0.5);
        let mut proxy = DepthMap::empty(cam);
        proxy.depth.fill(0.8);
        let w = warp_view(&near, &proxy);
        assert!(w.rgba.iter().all(|p| p[3] == 0.0));
    }

    #[test]
    fn translated_plane_shifts_by_the_homography() {
        // Fronto-parallel plane at depth 1 m, target camera moved 0.04 m along
        // site x. Site +x is image -u here, so target pixel u sees source pixel
        // u - fx * 0.04 / 1.0 = u - 6.
        let src_cam = frontal(160, 120);
        let tgt_cam = src_cam.transformed(&Rigid::from_parts(Translation3::new(0.04, 0.0, 0.0), Rotation3::identity()));
        let scene = Scene {
            meshes: vec![SceneMesh::quad(
                Point3::new(0.0, 0.0, 1.0),
                2.0,
                2.0,
                RgbImage::from_fn(64, 4, |x, _| [x as f32 / 63.0; 3]),
            )],
        };
        let src = scene.capture(&src_cam, None);
        let rig = CaptureRig::new(vec![src_cam], vec![src.clone()]).unwrap();
        let proxy = fuse_depth_min(&rig, &tgt_cam).unwrap();
        let w = warp_view(&src, &proxy);
        for y in [30usize, 60, 90] {
            for x in 20..140usize {
                let got = w.rgba[w.index(x, y)];
                let expect = src.rgba[src.index(x - 6, y)];
                assert!((got[0] - expect[0]).abs() < 1e-5 && got[3] == 1.0, "x={x} y={y}");
            }
        }
    }

    #[test]
    fn blend_weights_follow_the_angle_rule() {
        let ratio = blend_weight(10f64.to_radians()) / blend_weight(30f64.to_radians());
        assert!((ratio - std::f64::consts::E).abs() < 1e-12);
        let c = 1.0 * blend_weight(10f64.to_radians()) / (blend_weight(10f64.to_radians()) + blend_weight(30f64.to_radians()));
        assert!((c - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn blend_of_single_contributor_is_identity() {
        let cam = frontal(16, 12);
        let src = flat_layer(cam, [0.3, 0.6, 0.9], 1.0);
        let mut proxy = DepthMap::empty(cam);
        proxy.depth.fill(1.0);
        let out = blend_ulr(std::slice::from_ref(&src), &proxy, &[cam]).unwrap();
        assert_eq!(out.rgba, src.rgba);
    }

    #[test]
    fn equal_colors_blend_to_that_color() {
        let cam = frontal(16, 12);
        let a = flat_layer(cam, [0.25, 0.5, 0.75], 1.0);
        let mut proxy = DepthMap::empty(cam);
        proxy.depth.fill(1.0);
        let left = cam.transformed(&Rigid::from_parts(Translation3::new(-0.2, 0.0, 0.0), Rotation3::identity()));
        let right = cam.transformed(&Rigid::from_parts(Translation3::new(0.2, 0.0, 0.0), Rotation3::identity()));
        let out = blend_ulr(&[a.clone(), a.clone()], &proxy, &[left, right]).unwrap();
        for p in &out.rgba {
            for c in 0..3 {
                assert!((p[c] - a.rgba[0][c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn default_rig_is_six_border_cameras() {
        let s = ScreenGeometry::default();
        let cams = default_rig_cameras(&s);
        assert_eq!(cams.len(), 6);
        for c in &cams {
            let p = c.center();
            assert!(p.z < 0.0 && !(p.x.abs() < s.width / 2.0 && p.y.abs() < s.height / 2.0));
        }
    }

    #[test]
    fn touch_subset_drops_the_two_nearest_cameras() {
        let s = ScreenGeometry::default();
        let cams = default_rig_cameras(&s);
        // Right-hand side of the screen: the two x > 0 corner cameras go.
        let keep = touch_camera_subset(&cams, &s, &Point3::new(0.6, 0.0, 0.05));
        assert_eq!(keep, vec![0, 1, 3, 4]);
    }

    #[test]
    fn portrait_is_deterministic() {
        let s = ScreenGeometry::default();
        let cams = default_rig_cameras(&s);
        let rig = Scene::two_planes().capture_rig(&cams, Some(&s.occluder())).unwrap();
        let tgt = frontal(80, 60);
        let a = render_portrait(&rig, &tgt).unwrap();
        let b = render_portrait(&rig, &tgt).unwrap();
        assert_eq!(a.hash_hex(), b.hash_hex());
        assert!(a.validate().is_ok());
    }
}
