//! Site configuration files (TOML, meters).
//!
//! ```toml
//! [screen]
//! width = 1.439
//! height = 0.809
//! # pose = { rotation = [1,0,0, 0,1,0, 0,0,1], translation = [0,0,0] }
//!
//! [[cameras]]                 # optional; defaults to the six-camera border rig
//! position = [-0.78, 0.45, -0.03]
//! target = [0.0, 0.0, 0.7]
//! up = [0.0, 1.0, 0.0]
//! focal = 200.0
//! width = 320
//! height = 240
//!
//! [tracker]                   # current tracker -> site transform, if known
//! to_site = { rotation = [1,0,0, 0,1,0, 0,0,1], translation = [0,0,0] }
//!
//! [calibration]
//! # screen_points defaults to the 4 x 3 on-screen grid, touched row by row from the top left
//! tracker_points = [[x, y, z], ...]
//! ```

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{registration_rmse, solve_rigid_registration, ScreenGeometry};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Intrinsics, Rigid, RigidConfig};

pub const CALIBRATION_COLS: usize = 4;
pub const CALIBRATION_ROWS: usize = 3;
/// Fraction of the screen size kept clear at each border of the calibration grid.
const GRID_INSET: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenConfig {
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub pose: Option<RigidConfig>,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        let s = ScreenGeometry::default();
        Self {
            width: s.width,
            height: s.height,
            pose: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub position: [f64; 3],
    pub target: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    pub focal: f64,
    pub width: u32,
    pub height: u32,
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

impl CameraConfig {
    pub fn to_camera(&self) -> Result<Camera> {
        if !(self.focal > 0.0) || self.width == 0 || self.height == 0 {
            return Err(Error::Configuration("camera needs positive focal length and size".into()));
        }
        Camera::look_at(
            Intrinsics::centered(self.focal, self.width, self.height),
            Point3::from(self.position),
            Point3::from(self.target),
            Vector3::from(self.up),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    #[serde(default)]
    pub to_site: Option<RigidConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    #[serde(default)]
    pub screen_points: Option<Vec<[f64; 3]>>,
    #[serde(default)]
    pub tracker_points: Vec<[f64; 3]>,
}

/// One site's screen, cameras, tracker and calibration data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    #[serde(default)]
    pub screen: ScreenConfig,
    #[serde(default)]
    pub cameras: Vec<CameraConfig>,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

/// Outcome of fitting the tracker-to-site transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub tracker_to_site: Rigid,
    pub rmse: f64,
    pub residuals: Vec<f64>,
}

impl SiteConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Configuration(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn screen(&self) -> Result<ScreenGeometry> {
        let pose = match &self.screen.pose {
            Some(p) => p.to_rigid().map_err(|e| Error::field("screen.pose", e.to_string()))?,
            None => Rigid::identity(),
        };
        ScreenGeometry::new(self.screen.width, self.screen.height, pose)
            .map_err(|e| Error::field("screen", e.to_string()))
    }

    /// Configured cameras, or the default border rig when none are listed.
    pub fn cameras(&self) -> Result<Vec<Camera>> {
        if self.cameras.is_empty() {
            return Ok(crate::lumigraph::default_rig_cameras(&self.screen()?));
        }
        self.cameras
            .iter()
            .enumerate()
            .map(|(i, c)| c.to_camera().map_err(|e| Error::field(format!("cameras[{i}]"), e.to_string())))
            .collect()
    }

    pub fn tracker_to_site(&self) -> Result<Rigid> {
        match &self.tracker.to_site {
            Some(p) => p.to_rigid().map_err(|e| Error::field("tracker.to_site", e.to_string())),
            None => Ok(Rigid::identity()),
        }
    }

    /// Screen-side calibration targets in the site frame.
    pub fn screen_points(&self) -> Result<Vec<Point3<f64>>> {
        match &self.calibration.screen_points {
            Some(pts) => Ok(pts.iter().map(|p| Point3::from(*p)).collect()),
            None => Ok(calibration_grid(&self.screen()?, CALIBRATION_COLS, CALIBRATION_ROWS)),
        }
    }

    /// Solves for the tracker-to-site transform from the recorded touches.
    pub fn calibrate(&self) -> Result<CalibrationReport> {
        let p = self.screen_points()?;
        let q: Vec<_> = self.calibration.tracker_points.iter().map(|p| Point3::from(*p)).collect();
        if p.len() != q.len() {
            return Err(Error::field(
                "calibration.tracker_points",
                format!("expected {} points to match the screen targets, got {}", p.len(), q.len()),
            ));
        }
        let t = solve_rigid_registration(&p, &q)?;
        Ok(CalibrationReport {
            rmse: registration_rmse(&p, &q, &t),
            residuals: p.iter().zip(&q).map(|(a, b)| (a - t * b).norm()).collect(),
            tracker_to_site: t,
        })
    }
}

/// Regular `cols x rows` grid of on-screen targets in the site frame, row by row
/// from the top left as the user sees it.
pub fn calibration_grid(screen: &ScreenGeometry, cols: usize, rows: usize) -> Vec<Point3<f64>> {
    let frac = |i: usize, n: usize| {
        if n <= 1 {
            0.5
        } else {
            GRID_INSET + (1.0 - 2.0 * GRID_INSET) * i as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let x = (frac(c, cols) - 0.5) * screen.width;
            let y = (0.5 - frac(r, rows)) * screen.height;
            out.push(screen.from_screen(&Point3::new(x, y, 0.0)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation;
    use nalgebra::Translation3;

    #[test]
    fn grid_has_twelve_points_inside_the_screen() {
        let s = ScreenGeometry::default();
        let g = calibration_grid(&s, CALIBRATION_COLS, CALIBRATION_ROWS);
        assert_eq!(g.len(), 12);
        assert!(g.iter().all(|p| s.contains(p.x, p.y) && p.z == 0.0));
        assert!(g[0].x < g[1].x && g[0].y > g[4].y);
    }

    #[test]
    fn calibrate_recovers_tracker_transform() {
        let truth = Rigid::from_parts(Translation3::new(0.05, -0.4, 0.25), rotation(Vector3::x(), 0.3));
        let mut cfg = SiteConfig::default();
        let p = cfg.screen_points().unwrap();
        cfg.calibration.tracker_points = p.iter().map(|x| (truth.inverse() * x).coords.into()).collect();
        let report = cfg.calibrate().unwrap();
        assert!(report.rmse < 1e-9);
        assert!((report.tracker_to_site.to_homogeneous() - truth.to_homogeneous()).norm() < 1e-9);
    }

    #[test]
    fn count_mismatch_names_the_field() {
        let mut cfg = SiteConfig::default();
        cfg.calibration.tracker_points = vec![[0.0; 3]; 3];
        match cfg.calibrate() {
            Err(Error::Field { path, .. }) => assert_eq!(path, "calibration.tracker_points"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_documented_example() {
        let text = r#"
            [screen]
            width = 1.2
            height = 0.7

            [[cameras]]
            position = [-0.7, 0.4, -0.03]
            target = [0.0, 0.0, 0.7]
            focal = 200.0
            width = 320
            height = 240

            [calibration]
            tracker_points = [[0.0, 0.0, 0.0]]
        "#;
        let cfg = SiteConfig::from_toml(text).unwrap();
        assert_eq!(cfg.screen().unwrap().width, 1.2);
        assert_eq!(cfg.cameras().unwrap().len(), 1);
        assert!(SiteConfig::from_toml("[screen]\nwidth = 1\nheight = 1\ncolour = 3\n").is_err());
    }
}
