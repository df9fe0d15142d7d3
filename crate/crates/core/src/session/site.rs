//! Per-site pipeline stages: capture/render (sender), receive/fuse (receiver) and detect.
//!
//! Stages own their state and exchange data only through the messages the
//! session routes between them.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::Point3;

use super::message::{MessageKind, Payload, SiteFrameMessage, SiteId, SteeringInput};
use super::pairing::pair_closest;
use super::scenario::{flat_hand, HandTrack, Scenario, SiteScenario};
use super::{cadence_tick, PORTRAIT_HZ, SKELETON_HZ};
use crate::appearance::{apply_to_texture, fit_color_transform, hand_region_mask, ColorTransform};
use crate::error::Result;
use crate::fusion::{compose_background, hand_distance, overlay_blend, with_hand_alpha, FusionParams, HandDistance};
use crate::geometry::{centroid, Camera, Rigid};
use crate::lumigraph::{render_portrait, touch_camera_subset, Scene, SceneMesh};
use crate::raster::{LayerImage, RgbImage};
use crate::render::{rasterize, ScreenOccluder};
use crate::skeleton_rig::{adapt_to_skeleton, pose_from_tracker, skin_vertices, template_mesh, HandSkeleton, RiggedHandMesh};
use crate::spatial_calib::{
    compute_viewpoint, observe_eyes, remote_target_camera, window_camera, ScreenGeometry, SiteTransform, Viewpoint,
};
use crate::touch::{trigger_haptic, HapticPulse, SimulatedActuator, TouchDetector, TouchEvent, TouchParams};

/// Receiver pairs a portrait with no skeleton farther than this from it.
pub const MAX_PAIR_SKEW_MS: i64 = 100;
/// Detection ignores remote samples older than this relative to the local one.
pub const MAX_REMOTE_AGE_MS: i64 = 1000;
const PORTRAIT_BUFFER: usize = 4;
const SKELETON_BUFFER: usize = 64;

/// Linear RGB backdrop of the receiver's virtual room.
pub fn room_background(width: usize, height: usize) -> RgbImage {
    RgbImage::from_fn(width, height, |x, y| {
        let v = y as f32 / height.max(1) as f32;
        let stripe = if (x / 16) % 2 == 0 { 0.0 } else { 0.02 };
        [0.42 - 0.18 * v + stripe, 0.44 - 0.2 * v + stripe, 0.5 - 0.26 * v + stripe]
    })
}

/// The participant as the capture rig sees them.
#[derive(Debug, Clone)]
pub struct Participant {
    pub rest: HandSkeleton,
    pub mesh: RiggedHandMesh,
}

impl Participant {
    pub fn new(cfg: &SiteScenario) -> Result<Self> {
        let rest = HandSkeleton::at_rest(cfg.rest_joints(), 0)?;
        let mut mesh = adapt_to_skeleton(&template_mesh(), &rest)?;
        let tint = cfg.skin_tint;
        for px in &mut mesh.texture.data {
            for c in 0..3 {
                px[c] = (px[c] * tint[c]).clamp(0.0, 1.0);
            }
        }
        Ok(Self { rest, mesh })
    }

    pub fn posed_mesh(&self, joints: &[Point3<f64>], t_ms: i64) -> Result<SceneMesh> {
        let pose = pose_from_tracker(&self.rest, joints, t_ms)?;
        Ok(SceneMesh {
            positions: skin_vertices(&self.mesh, &pose)?,
            faces: self.mesh.faces.clone(),
            uvs: self.mesh.uvs.clone(),
            texture: self.mesh.texture.clone(),
        })
    }
}

/// Where a site's hand comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum HandSource {
    Track(HandTrack),
    Steered(SteeringInput),
}

#[derive(Debug, Clone, Default)]
pub struct SenderOutput {
    pub outgoing: Vec<SiteFrameMessage>,
    /// Tracker sample for the local detection stage.
    pub local_skeleton: Option<HandSkeleton>,
    pub viewpoint: Option<Viewpoint>,
    pub gap: bool,
}

/// Capture, portrait rendering and tracking at one site.
pub struct Sender {
    pub site: SiteId,
    pub screen: ScreenGeometry,
    local: SiteTransform,
    remote: SiteTransform,
    remote_screen: ScreenGeometry,
    cameras: Vec<Camera>,
    occluder: ScreenOccluder,
    body: Option<SceneMesh>,
    participant: Participant,
    tracker_rest: HandSkeleton,
    eyes: (Point3<f64>, Point3<f64>),
    rig_gaps: Vec<[i64; 2]>,
    source: HandSource,
    remote_viewpoint: Option<Viewpoint>,
    seq: BTreeMap<MessageKind, u64>,
    width: u32,
    height: u32,
    fusion: FusionParams,
    per_frame_viewpoint: bool,
}

impl Sender {
    pub fn new(site: SiteId, scenario: &Scenario, local: SiteTransform, remote: SiteTransform) -> Result<Self> {
        let cfg = scenario.sites.get(site);
        let screen = cfg.screen()?;
        Ok(Self {
            site,
            screen,
            local,
            remote,
            remote_screen: scenario.sites.get(site.other()).screen()?,
            cameras: cfg.cameras()?,
            occluder: screen.occluder(),
            body: cfg.body.then(Scene::body),
            participant: Participant::new(cfg)?,
            tracker_rest: template_mesh().rest_skeleton()?,
            eyes: cfg.eyes(),
            rig_gaps: cfg.rig_gaps.clone(),
            source: HandSource::Track(cfg.hand.clone()),
            remote_viewpoint: None,
            seq: BTreeMap::new(),
            width: scenario.render.width,
            height: scenario.render.height,
            fusion: scenario.fusion,
            per_frame_viewpoint: scenario.viewpoint.per_frame,
        })
    }

    pub fn set_source(&mut self, source: HandSource) {
        self.source = source;
    }

    pub fn source(&self) -> &HandSource {
        &self.source
    }

    pub fn receive_viewpoint(&mut self, vp: Viewpoint) {
        self.remote_viewpoint = Some(vp);
    }

    /// Tracked joints of the local hand at `t_ms`.
    pub fn joints_at(&self, t_ms: i64) -> Option<Vec<Point3<f64>>> {
        match &self.source {
            HandSource::Track(track) => track.joints_at(t_ms, &self.participant.rest.joints, &self.screen),
            HandSource::Steered(s) => Some(flat_hand(&self.participant.rest.joints, &self.screen, [s.x, s.y, s.distance])),
        }
    }

    /// The tracker's skeleton of the local hand at `t_ms`.
    pub fn skeleton_at(&self, t_ms: i64) -> Result<Option<HandSkeleton>> {
        self.joints_at(t_ms)
            .map(|j| pose_from_tracker(&self.tracker_rest, &j, t_ms))
            .transpose()
    }

    fn message(&mut self, t_ms: i64, payload: Payload) -> SiteFrameMessage {
        let seq = self.seq.entry(payload.kind()).or_insert(0);
        let m = SiteFrameMessage::new(self.site, t_ms, *seq, payload);
        *seq += 1;
        m
    }

    /// Camera rendering what the remote viewer sees through the window.
    pub fn target_camera(&self) -> Result<Camera> {
        let vp = self.remote_viewpoint.unwrap_or_else(|| Viewpoint::frontal(&self.remote_screen));
        let pose = remote_target_camera(&vp, &self.remote, &self.local);
        window_camera(pose, &self.screen, self.width, self.height).or_else(|_| {
            let pose = remote_target_camera(&Viewpoint::frontal(&self.remote_screen), &self.remote, &self.local);
            window_camera(pose, &self.screen, self.width, self.height)
        })
    }

    /// Renders `I_i` of the scene at `t_ms`.
    pub fn render_portrait_at(&self, t_ms: i64, joints: Option<&[Point3<f64>]>) -> Result<LayerImage> {
        let mut scene = Scene::default();
        scene.meshes.extend(self.body.clone());
        let mut cameras = self.cameras.clone();
        if let Some(j) = joints {
            scene.meshes.push(self.participant.posed_mesh(j, t_ms)?);
            let d = HandDistance::new(self.screen.plane().signed_distance(&centroid(j)), &self.fusion);
            if d.d < self.fusion.d_max {
                let keep = touch_camera_subset(&cameras, &self.screen, &centroid(j));
                cameras = keep.iter().map(|&i| cameras[i]).collect();
            }
        }
        let rig = scene.capture_rig(&cameras, Some(&self.occluder))?;
        render_portrait(&rig, &self.target_camera()?)
    }

    fn own_viewpoint(&self, t_ms: i64) -> Option<Viewpoint> {
        let obs = observe_eyes(&self.cameras, &self.eyes.0, &self.eyes.1);
        compute_viewpoint(&obs, t_ms).ok().filter(|v| v.validate().is_ok())
    }

    pub fn step(&mut self, t_ms: i64) -> Result<SenderOutput> {
        let mut out = SenderOutput::default();
        let portrait_tick = cadence_tick(t_ms, PORTRAIT_HZ);
        if t_ms == 0 || (self.per_frame_viewpoint && portrait_tick) {
            if let Some(vp) = self.own_viewpoint(t_ms) {
                out.viewpoint = Some(vp);
                let m = self.message(t_ms, Payload::Viewpoint(vp));
                out.outgoing.push(m);
            }
        }
        let joints = if portrait_tick || cadence_tick(t_ms, SKELETON_HZ) {
            self.joints_at(t_ms)
        } else {
            None
        };
        if portrait_tick {
            if self.rig_gaps.iter().any(|g| (g[0]..=g[1]).contains(&t_ms)) {
                out.gap = true;
            } else {
                let layer = self.render_portrait_at(t_ms, joints.as_deref())?;
                let m = self.message(t_ms, Payload::Portrait(Box::new(layer)));
                out.outgoing.push(m);
            }
        }
        if cadence_tick(t_ms, SKELETON_HZ) {
            if let Some(j) = &joints {
                let s = pose_from_tracker(&self.tracker_rest, j, t_ms)?;
                out.local_skeleton = Some(s.clone());
                let m = self.message(t_ms, Payload::Skeleton(s));
                out.outgoing.push(m);
            }
        }
        Ok(out)
    }

    pub fn touch_message(&mut self, ev: &TouchEvent) -> SiteFrameMessage {
        self.message(ev.timestamp_ms, Payload::Touch(ev.clone()))
    }
}

/// Result of one receiver frame.
#[derive(Debug, Clone)]
pub struct ReceiverFrame {
    pub frame: RgbImage,
    pub portrait_ts: Option<i64>,
    pub skeleton_ts: Option<i64>,
    pub distance: Option<HandDistance>,
    pub alpha_g: f64,
    pub stale: bool,
    /// Set on the frame where the appearance transform was fitted.
    pub appearance: Option<(ColorTransform, usize)>,
}

/// Fuses the remote portrait and mesh hand into the frame shown locally.
pub struct Receiver {
    pub site: SiteId,
    remote_screen: ScreenGeometry,
    fusion: FusionParams,
    depth_tolerance: f64,
    trigger_pixels: usize,
    template: RiggedHandMesh,
    adapted: Option<(RiggedHandMesh, HandSkeleton)>,
    color: Option<ColorTransform>,
    portraits: VecDeque<(i64, Box<LayerImage>)>,
    skeletons: VecDeque<HandSkeleton>,
    background: RgbImage,
    last_frame: Option<RgbImage>,
}

impl Receiver {
    pub fn new(site: SiteId, scenario: &Scenario) -> Result<Self> {
        Ok(Self {
            site,
            remote_screen: scenario.sites.get(site.other()).screen()?,
            fusion: scenario.fusion,
            depth_tolerance: scenario.appearance.depth_tolerance,
            trigger_pixels: scenario.trigger_pixels(),
            template: template_mesh(),
            adapted: None,
            color: None,
            portraits: VecDeque::new(),
            skeletons: VecDeque::new(),
            background: room_background(scenario.render.width as usize, scenario.render.height as usize),
            last_frame: None,
        })
    }

    pub fn push_portrait(&mut self, ts: i64, layer: Box<LayerImage>) {
        self.portraits.push_back((ts, layer));
        while self.portraits.len() > PORTRAIT_BUFFER {
            self.portraits.pop_front();
        }
    }

    pub fn push_skeleton(&mut self, s: HandSkeleton) {
        self.skeletons.push_back(s);
        while self.skeletons.len() > SKELETON_BUFFER {
            self.skeletons.pop_front();
        }
    }

    pub fn color_transform(&self) -> Option<&ColorTransform> {
        self.color.as_ref()
    }

    pub fn last_frame(&self) -> Option<&RgbImage> {
        self.last_frame.as_ref()
    }

    fn paired_skeleton(&self, portrait_ts: i64) -> Option<&HandSkeleton> {
        let ts: Vec<i64> = self.skeletons.iter().map(|s| s.timestamp_ms).collect();
        let i = pair_closest(portrait_ts, &ts)?;
        ((ts[i] - portrait_ts).abs() <= MAX_PAIR_SKEW_MS).then(|| &self.skeletons[i])
    }

    /// Mesh hand `I_g` (opaque coverage) posed to `skeleton`, seen by `camera`.
    fn render_hand(&mut self, skeleton: &HandSkeleton, camera: &Camera) -> Result<LayerImage> {
        if self.adapted.is_none() {
            let mesh = adapt_to_skeleton(&self.template, skeleton)?;
            let rest = mesh.rest_skeleton()?;
            self.adapted = Some((mesh, rest));
        }
        let (mesh, rest) = self.adapted.as_ref().expect("adapted above");
        let pose = pose_from_tracker(rest, &skeleton.joints, skeleton.timestamp_ms)?;
        let verts = skin_vertices(mesh, &pose)?;
        let mut layer = LayerImage::empty(*camera);
        rasterize(&mut layer, &mesh.view(&verts), None);
        Ok(layer)
    }

    fn stale(&mut self) -> ReceiverFrame {
        let frame = self.last_frame.clone().unwrap_or_else(|| self.background.clone());
        ReceiverFrame {
            frame,
            portrait_ts: None,
            skeleton_ts: None,
            distance: None,
            alpha_g: 0.0,
            stale: true,
            appearance: None,
        }
    }

    pub fn frame(&mut self, _now_ms: i64) -> Result<ReceiverFrame> {
        let Some((pts, portrait)) = self.portraits.back().cloned() else {
            return Ok(self.stale());
        };
        let skeleton = self.paired_skeleton(pts).cloned();
        let mut appearance = None;
        let (fused, distance) = match &skeleton {
            None => ((*portrait).clone(), None),
            Some(s) => {
                let mut hand = self.render_hand(s, &portrait.camera)?;
                if self.color.is_none() {
                    let mask = hand_region_mask(&portrait, &hand, self.depth_tolerance)?;
                    let n = mask.count();
                    if n >= self.trigger_pixels {
                        if let Ok(t) = fit_color_transform(&portrait, &hand, &mask) {
                            let (mesh, _) = self.adapted.as_mut().expect("adapted by render_hand");
                            mesh.texture = apply_to_texture(&self.template.texture, &t);
                            self.color = Some(t);
                            appearance = Some((t, n));
                            hand = self.render_hand(s, &portrait.camera)?;
                        }
                    }
                }
                let d = hand_distance(s, &self.remote_screen, &self.fusion);
                let fused = overlay_blend(&portrait, &with_hand_alpha(&hand, &d, &self.fusion))?;
                (fused, Some(d))
            }
        };
        let frame = compose_background(&fused, &self.background)?;
        self.last_frame = Some(frame.clone());
        Ok(ReceiverFrame {
            frame,
            portrait_ts: Some(pts),
            skeleton_ts: skeleton.as_ref().map(|s| s.timestamp_ms),
            alpha_g: distance.map_or(0.0, |d| d.alpha(&self.fusion)),
            distance,
            stale: false,
            appearance,
        })
    }
}

/// A detected touch with the haptic pulse it scheduled.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub event: TouchEvent,
    pub pulse: HapticPulse,
    pub local_ts: i64,
    pub remote_ts: i64,
}

/// Touch detection stage; sole owner of the refractory state.
pub struct DetectionStage {
    pub site: SiteId,
    screen: ScreenGeometry,
    remote_to_local: Rigid,
    detector: TouchDetector,
    local: Option<HandSkeleton>,
    remote: VecDeque<HandSkeleton>,
    pub actuator: SimulatedActuator,
}

impl DetectionStage {
    pub fn new(site: SiteId, screen: ScreenGeometry, remote_to_local: Rigid, params: TouchParams) -> Self {
        Self {
            site,
            screen,
            remote_to_local,
            detector: TouchDetector::new(params),
            local: None,
            remote: VecDeque::new(),
            actuator: SimulatedActuator::default(),
        }
    }

    pub fn push_local(&mut self, s: HandSkeleton) {
        self.local = Some(s);
    }

    pub fn push_remote(&mut self, s: HandSkeleton) {
        self.remote.push_back(s);
        while self.remote.len() > SKELETON_BUFFER {
            self.remote.pop_front();
        }
    }

    pub fn local(&self) -> Option<&HandSkeleton> {
        self.local.as_ref()
    }

    /// Pairs the latest local sample with the closest remote one and tests for touch.
    pub fn detect(&mut self, now_ms: i64) -> Option<Detection> {
        let local = self.local.as_ref()?;
        let ts: Vec<i64> = self.remote.iter().map(|s| s.timestamp_ms).collect();
        let i = pair_closest(local.timestamp_ms, &ts)?;
        if (local.timestamp_ms - ts[i]).abs() > MAX_REMOTE_AGE_MS {
            return None;
        }
        let remote = self.remote[i].transformed(&self.remote_to_local);
        let event = self.detector.detect(local, &remote, &self.screen, now_ms)?;
        let pulse = trigger_haptic(&event, &mut self.actuator);
        Some(Detection {
            local_ts: local.timestamp_ms,
            remote_ts: ts[i],
            event,
            pulse,
        })
    }
}
