//! Screen geometry, the shared two-site virtual space, calibration and viewpoints.
//!
//! Each site frame has the display plane at `z = 0` (in screen coordinates) with
//! `+z` toward the local user. The global frame is site A's screen frame. Site B
//! is embedded with a half turn about the vertical axis, `(x, y, z) -> (-x, y, -z)`,
//! so the two screens coincide and the users face each other through it.

mod config;
mod registration;
mod viewpoint;

pub use config::{calibration_grid, CalibrationReport, CameraConfig, ScreenConfig, SiteConfig, CALIBRATION_COLS, CALIBRATION_ROWS};
pub use registration::{registration_residual, registration_rmse, solve_rigid_registration};
pub use viewpoint::{compute_viewpoint, observe_eyes, triangulate, EyeObservation, MIN_RAY_ANGLE_DEG};

use nalgebra::{Matrix3, Point3, Rotation3, Translation3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Intrinsics, Plane, Rigid};
use crate::render::ScreenOccluder;

/// 65-inch 16:9 panel.
pub const DEFAULT_SCREEN_WIDTH: f64 = 1.439;
pub const DEFAULT_SCREEN_HEIGHT: f64 = 0.809;
/// Typical viewing distance in front of the screen.
pub const DEFAULT_VIEW_DISTANCE: f64 = 0.7;

/// Display rectangle; `pose` maps screen coordinates to the site frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenGeometry {
    pub width: f64,
    pub height: f64,
    pub pose: Rigid,
}

impl Default for ScreenGeometry {
    fn default() -> Self {
        Self {
            width: DEFAULT_SCREEN_WIDTH,
            height: DEFAULT_SCREEN_HEIGHT,
            pose: Rigid::identity(),
        }
    }
}

impl ScreenGeometry {
    pub fn new(width: f64, height: f64, pose: Rigid) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::Configuration(format!(
                "screen size must be positive, got {width} x {height}"
            )));
        }
        crate::geometry::validate_rigid(&pose)?;
        Ok(Self { width, height, pose })
    }

    /// Screen plane in the site frame, normal toward the user.
    pub fn plane(&self) -> Plane {
        Plane::new(
            Point3::from(self.pose.translation.vector),
            self.pose.rotation * Vector3::z(),
        )
    }

    /// Site point in screen coordinates: `(x, y)` on the panel, `z` signed distance.
    pub fn to_screen(&self, p: &Point3<f64>) -> Point3<f64> {
        self.pose.inverse_transform_point(p)
    }

    pub fn from_screen(&self, p: &Point3<f64>) -> Point3<f64> {
        self.pose.transform_point(p)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.width / 2.0 && y.abs() <= self.height / 2.0
    }

    /// Corners in screen coordinates: bottom-left, bottom-right, top-right, top-left.
    pub fn corners(&self) -> [Point3<f64>; 4] {
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        [
            Point3::new(-hw, -hh, 0.0),
            Point3::new(hw, -hh, 0.0),
            Point3::new(hw, hh, 0.0),
            Point3::new(-hw, hh, 0.0),
        ]
    }

    /// The panel as an occluder for capture cameras (screen coordinates).
    pub fn occluder(&self) -> ScreenOccluder {
        ScreenOccluder::new(self.width, self.height)
    }
}

/// Rigid embedding of one site frame into the shared global frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteTransform {
    pub site_to_global: Rigid,
}

impl SiteTransform {
    pub fn to_global(&self, p: &Point3<f64>) -> Point3<f64> {
        self.site_to_global.transform_point(p)
    }

    pub fn from_global(&self, p: &Point3<f64>) -> Point3<f64> {
        self.site_to_global.inverse_transform_point(p)
    }

    /// Transform taking this site's coordinates into `other`'s.
    pub fn to_site(&self, other: &SiteTransform) -> Rigid {
        other.site_to_global.inverse() * self.site_to_global
    }
}

/// Half turn about `+y`: the mirror embedding for site B.
pub fn facing_turn() -> Rigid {
    Rigid::from_parts(
        Translation3::identity(),
        Rotation3::from_matrix_unchecked(Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, -1.0))),
    )
}

/// Aligns both screens in one global frame with the users on opposite sides.
pub fn build_global_space(a: &ScreenGeometry, b: &ScreenGeometry) -> Result<(SiteTransform, SiteTransform)> {
    const SIZE_TOLERANCE: f64 = 1e-6;
    if (a.width - b.width).abs() > SIZE_TOLERANCE || (a.height - b.height).abs() > SIZE_TOLERANCE {
        return Err(Error::Configuration(format!(
            "screens differ in size: {} x {} vs {} x {}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok((
        SiteTransform {
            site_to_global: a.pose.inverse(),
        },
        SiteTransform {
            site_to_global: facing_turn() * b.pose.inverse(),
        },
    ))
}

/// Midpoint between the user's eyes in their own site frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub position: Point3<f64>,
    pub timestamp_ms: i64,
}

impl Viewpoint {
    pub fn new(position: Point3<f64>, timestamp_ms: i64) -> Result<Self> {
        let v = Self { position, timestamp_ms };
        v.validate()?;
        Ok(v)
    }

    /// Frontal default used before any viewpoint has been received.
    pub fn frontal(screen: &ScreenGeometry) -> Self {
        Self {
            position: screen.from_screen(&Point3::new(0.0, 0.0, DEFAULT_VIEW_DISTANCE)),
            timestamp_ms: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.position.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("viewpoint is not finite".into()));
        }
        if self.position.z <= 0.0 {
            return Err(Error::Validation(format!(
                "viewpoint z = {} is not in front of the screen",
                self.position.z
            )));
        }
        Ok(())
    }
}

/// Pose, in the remote site frame, of a camera at the local viewer's eyes
/// looking through the shared screen (camera `x` is the local viewer's right).
pub fn remote_target_camera(viewpoint_local: &Viewpoint, local: &SiteTransform, remote: &SiteTransform) -> Rigid {
    let to_remote = local.to_site(remote);
    let looking_at_screen =
        Rotation3::from_matrix_unchecked(Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)));
    let local_pose = Rigid::from_parts(Translation3::from(viewpoint_local.position.coords), looking_at_screen);
    to_remote * local_pose
}

/// Off-axis camera at `pose` whose image exactly spans `screen` (the virtual window).
pub fn window_camera(pose: Rigid, screen: &ScreenGeometry, width: u32, height: u32) -> Result<Camera> {
    let probe = Camera::new(Intrinsics::centered(1.0, width, height), pose);
    let corners = screen.corners().map(|c| probe.to_camera(&screen.from_screen(&c)));
    if corners.iter().any(|c| c.z <= crate::geometry::NEAR_PLANE) {
        return Err(Error::Configuration("viewpoint is on the wrong side of the screen".into()));
    }
    let xs = corners.map(|c| c.x / c.z);
    let ys = corners.map(|c| c.y / c.z);
    let (x0, x1) = (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = (ys.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let fx = width as f64 / (x1 - x0);
    let fy = height as f64 / (y1 - y0);
    Ok(Camera::new(
        Intrinsics {
            fx,
            fy,
            cx: -fx * x0,
            cy: -fy * y0,
            width,
            height,
        },
        pose,
    ))
}
