//! Scenario files: what each participant does during a simulated session.
//!
//! TOML, meters and milliseconds. Every table is optional.
//!
//! ```toml
//! duration_ms = 2400
//! seed = 7
//!
//! [render]
//! width = 320
//! height = 240
//!
//! [fusion]                       # d_min, d_max
//! [touch]                        # joint_screen_threshold, overlap_area_threshold, refractory_ms
//! [appearance]
//! depth_tolerance = 0.05
//! # trigger_pixels defaults to 2000 scaled from 1280x720 to the render size
//!
//! [viewpoint]
//! per_frame = false              # recompute and resend the viewpoint with every portrait
//!
//! [channels.portrait]            # base_latency_ms, jitter_ms, drop_rate, seed
//! base_latency_ms = 400
//! [channels.skeleton]            # also carries viewpoints and touch notifications
//! base_latency_ms = 250
//!
//! [sites.a]
//! hand_scale = 1.0               # uniform scale of the participant's hand vs the template
//! skin_tint = [1.1, 0.85, 0.75]  # per-channel factor on the template skin
//! eyes = [[-0.032, 0.05, 0.7], [0.032, 0.05, 0.7]]
//! body = true                    # torso card behind the hand
//! rig_gaps = [[500, 600]]        # capture outages, inclusive ranges
//! # screen = { width = 1.439, height = 0.809 }
//! # [[sites.a.cameras]] ...      # as in site configs; default is the border rig
//!
//! [sites.a.hand]
//! kind = "approach"              # "absent" | "approach" | "keyframes"
//! x = 0.1                        # palm center on the screen
//! y = 0.0
//! from = 0.5                     # distance to the screen
//! to = 0.0
//! start_ms = 0
//! end_ms = 2000
//!
//! # kind = "keyframes"
//! # [[sites.a.hand.keyframes]]
//! # t_ms = 0
//! # palm = [0.1, 0.0, 0.5]       # x, y, distance; or joints = [[x, y, z], ... 21 entries]
//! ```

use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::appearance::{adapt_trigger_pixels, DEFAULT_DEPTH_TOLERANCE};
use crate::error::{Error, Result};
use crate::fusion::FusionParams;
use crate::geometry::{centroid, Camera};
use crate::lumigraph::{default_rig_cameras, DEFAULT_HEIGHT, DEFAULT_WIDTH};
use crate::skeleton_rig::{template_rest_joints, JOINT_COUNT, WRIST};
use crate::spatial_calib::{CameraConfig, ScreenConfig, ScreenGeometry};
use crate::touch::TouchParams;

use super::channel::ChannelModel;
use super::message::SiteId;

/// Interpupillary distance of the default eyes.
const DEFAULT_IPD: f64 = 0.064;
const DEFAULT_EYE_HEIGHT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration_ms: i64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub fusion: FusionParams,
    #[serde(default)]
    pub touch: TouchParams,
    #[serde(default)]
    pub appearance: AppearanceConfig,
    #[serde(default)]
    pub viewpoint: ViewpointConfig,
    #[serde(default)]
    pub channels: ChannelsConfig,
    #[serde(default)]
    pub sites: Sites,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppearanceConfig {
    #[serde(default = "default_depth_tolerance")]
    pub depth_tolerance: f64,
    #[serde(default)]
    pub trigger_pixels: Option<usize>,
}

fn default_depth_tolerance() -> f64 {
    DEFAULT_DEPTH_TOLERANCE
}

impl Default for AppearanceConfig {
    fn default() -> Self {
        Self {
            depth_tolerance: DEFAULT_DEPTH_TOLERANCE,
            trigger_pixels: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewpointConfig {
    #[serde(default)]
    pub per_frame: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsConfig {
    #[serde(default = "ChannelModel::portrait_default")]
    pub portrait: ChannelModel,
    #[serde(default = "ChannelModel::skeleton_default")]
    pub skeleton: ChannelModel,
}

impl Default for ChannelsConfig {
    fn default() -> Self {
        Self {
            portrait: ChannelModel::portrait_default(),
            skeleton: ChannelModel::skeleton_default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sites {
    #[serde(default)]
    pub a: SiteScenario,
    #[serde(default)]
    pub b: SiteScenario,
}

impl Sites {
    pub fn get(&self, site: SiteId) -> &SiteScenario {
        match site {
            SiteId::A => &self.a,
            SiteId::B => &self.b,
        }
    }

    pub fn get_mut(&mut self, site: SiteId) -> &mut SiteScenario {
        match site {
            SiteId::A => &mut self.a,
            SiteId::B => &mut self.b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteScenario {
    #[serde(default = "one")]
    pub hand_scale: f64,
    #[serde(default = "default_tint")]
    pub skin_tint: [f32; 3],
    #[serde(default = "default_eyes")]
    pub eyes: [[f64; 3]; 2],
    #[serde(default = "yes")]
    pub body: bool,
    #[serde(default)]
    pub rig_gaps: Vec<[i64; 2]>,
    #[serde(default)]
    pub screen: ScreenConfig,
    #[serde(default)]
    pub cameras: Vec<CameraConfig>,
    #[serde(default)]
    pub hand: HandTrack,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_tint() -> [f32; 3] {
    [1.1, 0.85, 0.75]
}

fn default_eyes() -> [[f64; 3]; 2] {
    let h = DEFAULT_IPD / 2.0;
    [
        [-h, DEFAULT_EYE_HEIGHT, crate::spatial_calib::DEFAULT_VIEW_DISTANCE],
        [h, DEFAULT_EYE_HEIGHT, crate::spatial_calib::DEFAULT_VIEW_DISTANCE],
    ]
}

impl Default for SiteScenario {
    fn default() -> Self {
        Self {
            hand_scale: 1.0,
            skin_tint: default_tint(),
            eyes: default_eyes(),
            body: true,
            rig_gaps: Vec::new(),
            screen: ScreenConfig::default(),
            cameras: Vec::new(),
            hand: HandTrack::Absent,
        }
    }
}

impl SiteScenario {
    pub fn screen(&self) -> Result<ScreenGeometry> {
        let pose = match &self.screen.pose {
            Some(p) => p.to_rigid().map_err(|e| Error::field("screen.pose", e.to_string()))?,
            None => crate::geometry::Rigid::identity(),
        };
        ScreenGeometry::new(self.screen.width, self.screen.height, pose).map_err(|e| Error::field("screen", e.to_string()))
    }

    pub fn cameras(&self) -> Result<Vec<Camera>> {
        if self.cameras.is_empty() {
            return Ok(default_rig_cameras(&self.screen()?));
        }
        self.cameras
            .iter()
            .enumerate()
            .map(|(i, c)| c.to_camera().map_err(|e| Error::field(format!("cameras[{i}]"), e.to_string())))
            .collect()
    }

    pub fn eyes(&self) -> (Point3<f64>, Point3<f64>) {
        (Point3::from(self.eyes[0]), Point3::from(self.eyes[1]))
    }

    /// The participant's rest joints: the template scaled about the wrist.
    pub fn rest_joints(&self) -> Vec<Point3<f64>> {
        let t = template_rest_joints();
        let w = t[WRIST];
        t.iter().map(|p| w + (p - w) * self.hand_scale).collect()
    }

    pub fn in_rig_gap(&self, t_ms: i64) -> bool {
        self.rig_gaps.iter().any(|g| (g[0]..=g[1]).contains(&t_ms))
    }

    fn validate(&self) -> Result<()> {
        if !(self.hand_scale.is_finite() && (0.5..=2.0).contains(&self.hand_scale)) {
            return Err(Error::field("hand_scale", "must be in [0.5, 2]"));
        }
        if self.skin_tint.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::field("skin_tint", "must be finite and non-negative"));
        }
        for (i, e) in self.eyes.iter().enumerate() {
            if e.iter().any(|v| !v.is_finite()) || e[2] <= 0.0 {
                return Err(Error::field(format!("eyes[{i}]"), "must be finite and in front of the screen"));
            }
        }
        for (i, g) in self.rig_gaps.iter().enumerate() {
            if g[0] > g[1] {
                return Err(Error::field(format!("rig_gaps[{i}]"), "start after end"));
            }
        }
        let screen = self.screen()?;
        let cams = self.cameras()?;
        if cams.is_empty() {
            return Err(Error::field("cameras", "at least one camera is required"));
        }
        self.hand.validate(&screen).map_err(|e| prefix("hand", e))
    }
}

/// Palm placement: center `(x, y)` on the screen, `distance` in front of it.
pub type PalmPose = [f64; 3];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HandTrack {
    /// No hand in front of the display.
    #[default]
    Absent,
    /// Flat hand facing the screen, moving straight toward it.
    Approach {
        x: f64,
        y: f64,
        from: f64,
        to: f64,
        start_ms: i64,
        end_ms: i64,
    },
    /// Linear interpolation between keyframes; held before the first and after the last.
    Keyframes { keyframes: Vec<Keyframe> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub t_ms: i64,
    #[serde(default)]
    pub palm: Option<PalmPose>,
    #[serde(default)]
    pub joints: Option<Vec<[f64; 3]>>,
}

/// Joints of a flat hand (palm toward the screen, fingers up) whose joint centroid is at `palm`.
pub fn flat_hand(rest: &[Point3<f64>], screen: &ScreenGeometry, palm: PalmPose) -> Vec<Point3<f64>> {
    let c = centroid(rest);
    let offset = Vector3::new(palm[0], palm[1], palm[2]) - c.coords;
    rest.iter().map(|p| screen.from_screen(&(p + offset))).collect()
}

impl HandTrack {
    /// Tracked joints at `t_ms`, or `None` when no hand is present.
    pub fn joints_at(&self, t_ms: i64, rest: &[Point3<f64>], screen: &ScreenGeometry) -> Option<Vec<Point3<f64>>> {
        match self {
            HandTrack::Absent => None,
            HandTrack::Approach {
                x,
                y,
                from,
                to,
                start_ms,
                end_ms,
            } => {
                let s = ((t_ms - start_ms) as f64 / (end_ms - start_ms) as f64).clamp(0.0, 1.0);
                Some(flat_hand(rest, screen, [*x, *y, from + (to - from) * s]))
            }
            HandTrack::Keyframes { keyframes } => {
                let joints = |k: &Keyframe| match (&k.palm, &k.joints) {
                    (Some(p), _) => flat_hand(rest, screen, *p),
                    (None, Some(j)) => j.iter().map(|p| Point3::from(*p)).collect(),
                    (None, None) => unreachable!("validated keyframe"),
                };
                let i = keyframes.partition_point(|k| k.t_ms <= t_ms);
                if i == 0 {
                    return Some(joints(&keyframes[0]));
                }
                if i == keyframes.len() {
                    return Some(joints(&keyframes[i - 1]));
                }
                let (k0, k1) = (&keyframes[i - 1], &keyframes[i]);
                let s = (t_ms - k0.t_ms) as f64 / (k1.t_ms - k0.t_ms) as f64;
                let (a, b) = (joints(k0), joints(k1));
                Some(a.iter().zip(&b).map(|(p, q)| p + (q - p) * s).collect())
            }
        }
    }

    fn validate(&self, screen: &ScreenGeometry) -> Result<()> {
        match self {
            HandTrack::Absent => Ok(()),
            HandTrack::Approach {
                x,
                y,
                from,
                to,
                start_ms,
                end_ms,
            } => {
                for (name, v) in [("x", x), ("y", y), ("from", from), ("to", to)] {
                    if !v.is_finite() {
                        return Err(Error::field(name, "must be finite"));
                    }
                }
                if *from < 0.0 {
                    return Err(Error::field("from", "distance must be >= 0"));
                }
                if *to < 0.0 {
                    return Err(Error::field("to", "distance must be >= 0"));
                }
                if end_ms <= start_ms {
                    return Err(Error::field("end_ms", "must be after start_ms"));
                }
                check_on_screen(screen, *x, *y).map_err(|m| Error::field("x", m))
            }
            HandTrack::Keyframes { keyframes } => {
                if keyframes.is_empty() {
                    return Err(Error::field("keyframes", "at least one keyframe is required"));
                }
                for (i, k) in keyframes.iter().enumerate() {
                    let path = |f: &str| format!("keyframes[{i}].{f}");
                    if i > 0 && k.t_ms <= keyframes[i - 1].t_ms {
                        return Err(Error::field(path("t_ms"), "keyframe timestamps must be strictly increasing"));
                    }
                    match (&k.palm, &k.joints) {
                        (Some(_), Some(_)) | (None, None) => {
                            return Err(Error::field(format!("keyframes[{i}]"), "exactly one of palm or joints is required"))
                        }
                        (Some(p), None) => {
                            if p.iter().any(|v| !v.is_finite()) || p[2] < 0.0 {
                                return Err(Error::field(path("palm"), "must be finite with distance >= 0"));
                            }
                            check_on_screen(screen, p[0], p[1]).map_err(|m| Error::field(path("palm"), m))?;
                        }
                        (None, Some(j)) => {
                            if j.len() != JOINT_COUNT {
                                return Err(Error::field(
                                    path("joints"),
                                    format!("expected {JOINT_COUNT} joints, got {}", j.len()),
                                ));
                            }
                            if j.iter().flatten().any(|v| !v.is_finite()) {
                                return Err(Error::field(path("joints"), "must be finite"));
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

fn check_on_screen(screen: &ScreenGeometry, x: f64, y: f64) -> std::result::Result<(), String> {
    if x.abs() > screen.width / 2.0 || y.abs() > screen.height / 2.0 {
        return Err(format!("palm center ({x}, {y}) is outside the screen"));
    }
    Ok(())
}

fn prefix(path: &str, e: Error) -> Error {
    match e {
        Error::Field { path: p, message } => Error::field(format!("{path}.{p}"), message),
        other => Error::field(path, other.to_string()),
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_ms <= 0 {
            return Err(Error::field("duration_ms", "must be positive"));
        }
        if self.render.width < 8 || self.render.height < 8 {
            return Err(Error::field("render", "frames must be at least 8 x 8"));
        }
        self.fusion.validate().map_err(|e| prefix("fusion", e))?;
        self.touch.validate().map_err(|e| prefix("touch", e))?;
        if !(self.appearance.depth_tolerance > 0.0) {
            return Err(Error::field("appearance.depth_tolerance", "must be positive"));
        }
        self.channels.portrait.validate().map_err(|e| prefix("channels.portrait", e))?;
        self.channels.skeleton.validate().map_err(|e| prefix("channels.skeleton", e))?;
        self.sites.a.validate().map_err(|e| prefix("sites.a", e))?;
        self.sites.b.validate().map_err(|e| prefix("sites.b", e))?;
        let (a, b) = (self.sites.a.screen()?, self.sites.b.screen()?);
        crate::spatial_calib::build_global_space(&a, &b).map_err(|e| prefix("sites.b.screen", e))?;
        Ok(())
    }

    pub fn trigger_pixels(&self) -> usize {
        self.appearance
            .trigger_pixels
            .unwrap_or_else(|| adapt_trigger_pixels(self.render.width as usize, self.render.height as usize))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn base(duration_ms: i64, a: HandTrack, b: HandTrack) -> Self {
        Self {
            duration_ms,
            seed: 0,
            render: RenderConfig::default(),
            fusion: FusionParams::default(),
            touch: TouchParams::default(),
            appearance: AppearanceConfig::default(),
            viewpoint: ViewpointConfig::default(),
            channels: ChannelsConfig::default(),
            sites: Sites {
                a: SiteScenario {
                    hand: a,
                    ..SiteScenario::default()
                },
                b: SiteScenario {
                    hand_scale: 0.92,
                    skin_tint: [0.8, 0.62, 0.5],
                    hand: b,
                    ..SiteScenario::default()
                },
            },
        }
    }

    /// Both participants bring a flat hand from 0.5 m to the screen over 2 s at
    /// mirrored screen positions, so their palms meet through the shared window.
    pub fn canonical_high_five() -> Self {
        let approach = |x: f64| HandTrack::Approach {
            x,
            y: 0.0,
            from: 0.5,
            to: 0.0,
            start_ms: 0,
            end_ms: 2000,
        };
        Self::base(2400, approach(0.1), approach(-0.1))
    }

    /// Nobody raises a hand.
    pub fn empty(duration_ms: i64) -> Self {
        Self::base(duration_ms, HandTrack::Absent, HandTrack::Absent)
    }

    /// Site A reaches the screen while site B holds back at 0.3 m.
    pub fn one_sided() -> Self {
        let mut s = Self::canonical_high_five();
        s.sites.b.hand = HandTrack::Approach {
            x: -0.1,
            y: 0.0,
            from: 0.5,
            to: 0.3,
            start_ms: 0,
            end_ms: 2000,
        };
        s
    }
}

fn parse_error(text: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::Parse {
        line,
        message: e.message().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HIGH_FIVE: &str = r#"
duration_ms = 2400

[sites.a.hand]
kind = "approach"
x = 0.1
y = 0.0
from = 0.5
to = 0.0
start_ms = 0
end_ms = 2000

[sites.b]
hand_scale = 0.92
skin_tint = [0.8, 0.62, 0.5]

[sites.b.hand]
kind = "approach"
x = -0.1
y = 0.0
from = 0.5
to = 0.0
start_ms = 0
end_ms = 2000
"#;

    fn field_path(r: Result<Scenario>) -> String {
        match r {
            Err(Error::Field { path, .. }) => path,
            other => panic!("expected field error, got {other:?}"),
        }
    }

    #[test]
    fn file_matches_builtin_high_five() {
        assert_eq!(Scenario::from_toml(HIGH_FIVE).unwrap(), Scenario::canonical_high_five());
    }

    #[test]
    fn toml_round_trip() {
        for s in [Scenario::canonical_high_five(), Scenario::one_sided(), Scenario::empty(1000)] {
            assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
        }
    }

    #[test]
    fn approach_distance_is_linear_then_held() {
        let s = Scenario::canonical_high_five();
        let site = &s.sites.a;
        let screen = site.screen().unwrap();
        let rest = site.rest_joints();
        let d = |t| {
            let j = site.hand.joints_at(t, &rest, &screen).unwrap();
            centroid(&j).z
        };
        assert!((d(0) - 0.5).abs() < 1e-12);
        assert!((d(1000) - 0.25).abs() < 1e-12);
        assert!((d(1920) - 0.02).abs() < 1e-12);
        assert_eq!(d(2000), 0.0);
        assert_eq!(d(2400), 0.0);
        let j = site.hand.joints_at(0, &rest, &screen).unwrap();
        assert!(j.iter().all(|p| (p.z - 0.5).abs() < 1e-12));
        let c = centroid(&j);
        assert!((c.x - 0.1).abs() < 1e-12 && c.y.abs() < 1e-12);
    }

    #[test]
    fn keyframes_interpolate() {
        let track = HandTrack::Keyframes {
            keyframes: vec![
                Keyframe { t_ms: 100, palm: Some([0.0, 0.0, 0.4]), joints: None },
                Keyframe { t_ms: 300, palm: Some([0.2, 0.0, 0.2]), joints: None },
            ],
        };
        let screen = ScreenGeometry::default();
        let rest = template_rest_joints();
        let at = |t| centroid(&track.joints_at(t, &rest, &screen).unwrap());
        assert!((at(0).z - 0.4).abs() < 1e-12);
        assert!((at(200).x - 0.1).abs() < 1e-12 && (at(200).z - 0.3).abs() < 1e-12);
        assert!((at(999).z - 0.2).abs() < 1e-12);
    }

    #[test]
    fn absent_hand_has_no_joints() {
        let rest = template_rest_joints();
        assert!(HandTrack::Absent.joints_at(0, &rest, &ScreenGeometry::default()).is_none());
    }

    #[test]
    fn validation_reports_field_paths() {
        let mut s = Scenario::canonical_high_five();
        s.sites.b.hand = HandTrack::Keyframes {
            keyframes: vec![
                Keyframe { t_ms: 0, palm: Some([0.0, 0.0, 0.4]), joints: None },
                Keyframe { t_ms: 100, palm: Some([0.0, 0.0, 0.3]), joints: None },
                Keyframe { t_ms: 100, palm: Some([0.0, 0.0, 0.2]), joints: None },
            ],
        };
        assert_eq!(field_path(Scenario::from_toml(&s.to_toml())), "sites.b.hand.keyframes[2].t_ms");

        let mut s = Scenario::canonical_high_five();
        s.channels.skeleton.drop_rate = 2.0;
        assert_eq!(field_path(s.validate().map(|_| s.clone())), "channels.skeleton.drop_rate");

        let mut s = Scenario::canonical_high_five();
        s.duration_ms = 0;
        assert_eq!(field_path(s.validate().map(|_| s.clone())), "duration_ms");

        let mut s = Scenario::canonical_high_five();
        s.sites.a.hand = HandTrack::Keyframes {
            keyframes: vec![Keyframe { t_ms: 0, palm: None, joints: Some(vec![[0.0; 3]; 3]) }],
        };
        assert_eq!(field_path(s.validate().map(|_| s.clone())), "sites.a.hand.keyframes[0].joints");

        let mut s = Scenario::canonical_high_five();
        s.sites.a.eyes[1][2] = -0.1;
        assert_eq!(field_path(s.validate().map(|_| s.clone())), "sites.a.eyes[1]");

        let mut s = Scenario::canonical_high_five();
        s.sites.b.screen.width = 1.0;
        assert_eq!(field_path(s.validate().map(|_| s.clone())), "sites.b.screen");
    }

    #[test]
    fn unknown_fields_are_parse_errors_with_lines() {
        let text = "duration_ms = 10\n[sites.a]\nhand_scal = 1.0\n[sites.b]\n";
        match Scenario::from_toml(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("hand_scal"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rig_gaps_are_inclusive() {
        let s = SiteScenario {
            rig_gaps: vec![[100, 200]],
            ..SiteScenario::default()
        };
        assert!(!s.in_rig_gap(99));
        assert!(s.in_rig_gap(100) && s.in_rig_gap(200));
        assert!(!s.in_rig_gap(201));
    }
}
