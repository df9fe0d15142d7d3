//! Shared fixtures for the pipeline benchmarks.

use touchlink_core::lumigraph::{default_rig_cameras, Scene};
use touchlink_core::{Camera, CaptureRig, Intrinsics, ScreenGeometry};

/// Viewer 60 cm behind the screen looking through it.
pub fn frontal_camera(width: u32, height: u32) -> Camera {
    let focal = 0.8 * width as f64;
    Camera::look_at(
        Intrinsics::centered(focal, width, height),
        [0.0, 0.0, -0.6].into(),
        [0.0, 0.0, 1.0].into(),
        [0.0, 1.0, 0.0].into(),
    )
    .expect("valid camera")
}

/// Two textured planes captured by the default border rig.
pub fn two_plane_rig() -> CaptureRig {
    let screen = ScreenGeometry::default();
    let cams = default_rig_cameras(&screen);
    Scene::two_planes()
        .capture_rig(&cams, Some(&screen.occluder()))
        .expect("capture")
}
