//! Wire messages and their binary encoding.
//!
//! Every frame is a little-endian `u32` byte count followed by that many bytes:
//!
//! | field | type |
//! |---|---|
//! | kind | `u8` ([`MessageKind`]) |
//! | site | `u8` (0 = A, 1 = B) |
//! | timestamp_ms | `i64` |
//! | seq | `u64`, per (site, kind) stream |
//! | payload | kind-specific, below |
//!
//! Payloads (all integers and floats little-endian):
//!
//! - `portrait` (1): camera as `fx fy cx cy: f64`, `width height: u32`, pose as
//!   12 `f64` (row-major rotation then translation); then `width * height` pixels
//!   of `r g b a: f32` followed by the depth plane as `width * height` `f32`.
//! - `skeleton` (2): `u8` joint count, joints as `x y z: f64`; `u8` bone count,
//!   bones as `parent child: u8`; one 12 `f64` transform per bone.
//! - `viewpoint` (3): `x y z: f64`.
//! - `touch` (4): `overlap_cm2: f64`, local then remote bbox as `x0 y0 x1 y1: f64`,
//!   local then remote near joints as `u8` count plus `u8` indices, `haptic_delay_ms: i64`.
//! - `steering` (5): `x y distance: f64` in the sender's screen coordinates.
//! - `snapshot` (6): see [`StateSnapshot`].
//! - `error` (7): `u32` length plus UTF-8 text.

use std::fmt;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rigid_from_array, rigid_to_array, Camera, Intrinsics};
use crate::raster::LayerImage;
use crate::skeleton_rig::HandSkeleton;
use crate::spatial_calib::Viewpoint;
use crate::touch::{HapticPulse, ScreenRect, TouchEvent};

/// Upper bound on a single encoded frame.
pub const MAX_FRAME_BYTES: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SiteId {
    A,
    B,
}

impl SiteId {
    pub const BOTH: [SiteId; 2] = [SiteId::A, SiteId::B];

    pub fn other(self) -> SiteId {
        match self {
            SiteId::A => SiteId::B,
            SiteId::B => SiteId::A,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(SiteId::A),
            1 => Ok(SiteId::B),
            _ => Err(Error::Codec(format!("unknown site {v}"))),
        }
    }
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SiteId::A => "A",
            SiteId::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Portrait = 1,
    Skeleton = 2,
    Viewpoint = 3,
    Touch = 4,
    Steering = 5,
    Snapshot = 6,
    Error = 7,
}

impl MessageKind {
    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => MessageKind::Portrait,
            2 => MessageKind::Skeleton,
            3 => MessageKind::Viewpoint,
            4 => MessageKind::Touch,
            5 => MessageKind::Steering,
            6 => MessageKind::Snapshot,
            7 => MessageKind::Error,
            _ => return Err(Error::Codec(format!("unknown message kind {v}"))),
        })
    }
}

/// Hand pose requested by an operator: palm center at `(x, y)` on the screen, `distance` in front of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringInput {
    pub x: f64,
    pub y: f64,
    pub distance: f64,
}

/// Per-site state reported to operators.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSnapshot {
    /// PNG of the fused frame shown at this site.
    pub frame_png: Vec<u8>,
    /// Distance of this site's own hand to its screen, if a hand is tracked.
    pub d: Option<f64>,
    pub alpha_g: f64,
    pub near_joints: u32,
    /// Last acknowledged steering pose.
    pub steering: Option<SteeringInput>,
}

/// Layout: `t_ms: i64`, then per site A, B: `u32` PNG length and bytes, `d` as a
/// `u8` presence flag and `f64`, `alpha_g: f64`, `near_joints: u32`, steering as a
/// flag plus `x y distance: f64`; then a `u32` count of touch events each as `u8`
/// site, `i64` timestamp and the touch payload; then a `u32` count of haptic
/// pulses each as `u8` site, `scheduled_ms duration_ms: i64`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot {
    pub t_ms: i64,
    pub sites: [SiteSnapshot; 2],
    pub touch_events: Vec<(SiteId, TouchEvent)>,
    pub haptic_pulses: Vec<(SiteId, HapticPulse)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Portrait(Box<LayerImage>),
    Skeleton(HandSkeleton),
    Viewpoint(Viewpoint),
    Touch(TouchEvent),
    Steering(SteeringInput),
    Snapshot(Box<StateSnapshot>),
    Error(String),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Portrait(_) => MessageKind::Portrait,
            Payload::Skeleton(_) => MessageKind::Skeleton,
            Payload::Viewpoint(_) => MessageKind::Viewpoint,
            Payload::Touch(_) => MessageKind::Touch,
            Payload::Steering(_) => MessageKind::Steering,
            Payload::Snapshot(_) => MessageKind::Snapshot,
            Payload::Error(_) => MessageKind::Error,
        }
    }
}

/// Timestamped unit exchanged between sites (and with serve clients).
#[derive(Debug, Clone, PartialEq)]
pub struct SiteFrameMessage {
    pub site: SiteId,
    pub timestamp_ms: i64,
    pub seq: u64,
    pub payload: Payload,
}

impl SiteFrameMessage {
    pub fn new(site: SiteId, timestamp_ms: i64, seq: u64, payload: Payload) -> Self {
        Self {
            site,
            timestamp_ms,
            seq,
            payload,
        }
    }

    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::with_capacity(64));
        w.u32(0);
        w.u8(self.kind() as u8);
        w.u8(self.site as u8);
        w.i64(self.timestamp_ms);
        w.u64(self.seq);
        match &self.payload {
            Payload::Portrait(l) => put_layer(&mut w, l),
            Payload::Skeleton(s) => put_skeleton(&mut w, s),
            Payload::Viewpoint(v) => w.point(&v.position),
            Payload::Touch(e) => put_touch(&mut w, e),
            Payload::Steering(s) => {
                w.f64(s.x);
                w.f64(s.y);
                w.f64(s.distance);
            }
            Payload::Snapshot(s) => put_snapshot(&mut w, s),
            Payload::Error(e) => w.bytes(e.as_bytes()),
        }
        let len = (w.0.len() - 4) as u32;
        w.0[..4].copy_from_slice(&len.to_le_bytes());
        w.0
    }

    /// Decodes exactly one frame; trailing bytes are an error.
    pub fn decode(buf: &[u8]) -> Result<Self> {
        let (msg, used) = Self::decode_prefix(buf)?;
        if used != buf.len() {
            return Err(Error::Codec(format!("{} trailing bytes", buf.len() - used)));
        }
        Ok(msg)
    }

    /// Decodes the first frame of `buf`, returning it and the bytes consumed.
    pub fn decode_prefix(buf: &[u8]) -> Result<(Self, usize)> {
        let mut r = Reader { buf, pos: 0 };
        let len = r.u32()? as usize;
        if len > MAX_FRAME_BYTES {
            return Err(Error::Codec(format!("frame of {len} bytes exceeds limit")));
        }
        let end = 4 + len;
        if buf.len() < end {
            return Err(Error::Codec(format!("frame truncated: need {end} bytes, have {}", buf.len())));
        }
        let mut r = Reader { buf: &buf[..end], pos: 4 };
        let kind = MessageKind::from_u8(r.u8()?)?;
        let site = SiteId::from_u8(r.u8()?)?;
        let timestamp_ms = r.i64()?;
        let seq = r.u64()?;
        let payload = match kind {
            MessageKind::Portrait => Payload::Portrait(Box::new(get_layer(&mut r)?)),
            MessageKind::Skeleton => Payload::Skeleton(get_skeleton(&mut r, timestamp_ms)?),
            MessageKind::Viewpoint => Payload::Viewpoint(Viewpoint::new(r.point()?, timestamp_ms)?),
            MessageKind::Touch => Payload::Touch(get_touch(&mut r, timestamp_ms)?),
            MessageKind::Steering => Payload::Steering(SteeringInput {
                x: r.f64()?,
                y: r.f64()?,
                distance: r.f64()?,
            }),
            MessageKind::Snapshot => Payload::Snapshot(Box::new(get_snapshot(&mut r, timestamp_ms)?)),
            MessageKind::Error => Payload::Error(r.string()?),
        };
        if r.pos != end {
            return Err(Error::Codec(format!("{kind:?} payload has {} unread bytes", end - r.pos)));
        }
        Ok((
            Self {
                site,
                timestamp_ms,
                seq,
                payload,
            },
            end,
        ))
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn point(&mut self, p: &Point3<f64>) {
        for v in p.iter() {
            self.f64(*v);
        }
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.0.extend_from_slice(b);
    }
    fn opt_f64(&mut self, v: Option<f64>) {
        self.u8(v.is_some() as u8);
        self.f64(v.unwrap_or(0.0));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Codec(format!("unexpected end of frame at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.array()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn point(&mut self) -> Result<Point3<f64>> {
        Ok(Point3::new(self.f64()?, self.f64()?, self.f64()?))
    }
    fn bytes(&mut self) -> Result<Vec<u8>> {
        let n = self.u32()? as usize;
        Ok(self.take(n)?.to_vec())
    }
    fn string(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?).map_err(|e| Error::Codec(e.to_string()))
    }
    fn opt_f64(&mut self) -> Result<Option<f64>> {
        let present = self.u8()?;
        let v = self.f64()?;
        match present {
            0 => Ok(None),
            1 => Ok(Some(v)),
            _ => Err(Error::Codec(format!("bad presence flag {present}"))),
        }
    }
    fn rigid(&mut self) -> Result<crate::geometry::Rigid> {
        let mut a = [0.0; 12];
        for v in &mut a {
            *v = self.f64()?;
        }
        rigid_from_array(&a).map_err(|e| Error::Codec(e.to_string()))
    }
}

fn put_layer(w: &mut Writer, l: &LayerImage) {
    let k = &l.camera.intrinsics;
    for v in [k.fx, k.fy, k.cx, k.cy] {
        w.f64(v);
    }
    w.u32(k.width);
    w.u32(k.height);
    for v in rigid_to_array(&l.camera.pose) {
        w.f64(v);
    }
    w.0.reserve(l.len() * 20);
    for p in &l.rgba {
        for c in p {
            w.f32(*c);
        }
    }
    for d in &l.depth {
        w.f32(*d);
    }
}

fn get_layer(r: &mut Reader<'_>) -> Result<LayerImage> {
    let (fx, fy, cx, cy) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
    let (width, height) = (r.u32()?, r.u32()?);
    let pose = r.rigid()?;
    let n = width as usize * height as usize;
    if n * 20 > r.buf.len() - r.pos {
        return Err(Error::Codec(format!("portrait {width}x{height} exceeds frame")));
    }
    let camera = Camera::new(
        Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        },
        pose,
    );
    let mut layer = LayerImage::empty(camera);
    for p in &mut layer.rgba {
        *p = [r.f32()?, r.f32()?, r.f32()?, r.f32()?];
    }
    for d in &mut layer.depth {
        *d = r.f32()?;
    }
    Ok(layer)
}

fn put_skeleton(w: &mut Writer, s: &HandSkeleton) {
    w.u8(s.joints.len() as u8);
    for p in &s.joints {
        w.point(p);
    }
    w.u8(s.bones.len() as u8);
    for &(p, c) in &s.bones {
        w.u8(p as u8);
        w.u8(c as u8);
    }
    for t in &s.bone_transforms {
        for v in rigid_to_array(t) {
            w.f64(v);
        }
    }
}

fn get_skeleton(r: &mut Reader<'_>, timestamp_ms: i64) -> Result<HandSkeleton> {
    let nj = r.u8()? as usize;
    let joints = (0..nj).map(|_| r.point()).collect::<Result<Vec<_>>>()?;
    let nb = r.u8()? as usize;
    let bones = (0..nb)
        .map(|_| Ok((r.u8()? as usize, r.u8()? as usize)))
        .collect::<Result<Vec<_>>>()?;
    let bone_transforms = (0..nb).map(|_| r.rigid()).collect::<Result<Vec<_>>>()?;
    let s = HandSkeleton {
        joints,
        bones,
        bone_transforms,
        timestamp_ms,
    };
    s.validate().map_err(|e| Error::Codec(format!("invalid skeleton: {e}")))?;
    Ok(s)
}

fn put_rect(w: &mut Writer, b: &ScreenRect) {
    for v in [b.x0, b.y0, b.x1, b.y1] {
        w.f64(v);
    }
}

fn get_rect(r: &mut Reader<'_>) -> Result<ScreenRect> {
    Ok(ScreenRect {
        x0: r.f64()?,
        y0: r.f64()?,
        x1: r.f64()?,
        y1: r.f64()?,
    })
}

fn put_joints(w: &mut Writer, j: &[usize]) {
    w.u8(j.len() as u8);
    for &i in j {
        w.u8(i as u8);
    }
}

fn get_joints(r: &mut Reader<'_>) -> Result<Vec<usize>> {
    let n = r.u8()? as usize;
    (0..n).map(|_| Ok(r.u8()? as usize)).collect()
}

fn put_touch(w: &mut Writer, e: &TouchEvent) {
    w.f64(e.overlap_area_cm2);
    put_rect(w, &e.local_bbox);
    put_rect(w, &e.remote_bbox);
    put_joints(w, &e.local_joints);
    put_joints(w, &e.remote_joints);
    w.i64(e.haptic_delay_ms);
}

fn get_touch(r: &mut Reader<'_>, timestamp_ms: i64) -> Result<TouchEvent> {
    Ok(TouchEvent {
        timestamp_ms,
        overlap_area_cm2: r.f64()?,
        local_bbox: get_rect(r)?,
        remote_bbox: get_rect(r)?,
        local_joints: get_joints(r)?,
        remote_joints: get_joints(r)?,
        haptic_delay_ms: r.i64()?,
    })
}

fn put_snapshot(w: &mut Writer, s: &StateSnapshot) {
    w.i64(s.t_ms);
    for site in &s.sites {
        w.bytes(&site.frame_png);
        w.opt_f64(site.d);
        w.f64(site.alpha_g);
        w.u32(site.near_joints);
        w.u8(site.steering.is_some() as u8);
        let st = site.steering.unwrap_or(SteeringInput {
            x: 0.0,
            y: 0.0,
            distance: 0.0,
        });
        w.f64(st.x);
        w.f64(st.y);
        w.f64(st.distance);
    }
    w.u32(s.touch_events.len() as u32);
    for (site, e) in &s.touch_events {
        w.u8(*site as u8);
        w.i64(e.timestamp_ms);
        put_touch(w, e);
    }
    w.u32(s.haptic_pulses.len() as u32);
    for (site, p) in &s.haptic_pulses {
        w.u8(*site as u8);
        w.i64(p.scheduled_ms);
        w.i64(p.duration_ms);
    }
}

fn get_site_snapshot(r: &mut Reader<'_>) -> Result<SiteSnapshot> {
    let frame_png = r.bytes()?;
    let d = r.opt_f64()?;
    let alpha_g = r.f64()?;
    let near_joints = r.u32()?;
    let has_steering = r.u8()?;
    let st = SteeringInput {
        x: r.f64()?,
        y: r.f64()?,
        distance: r.f64()?,
    };
    Ok(SiteSnapshot {
        frame_png,
        d,
        alpha_g,
        near_joints,
        steering: (has_steering != 0).then_some(st),
    })
}

fn get_snapshot(r: &mut Reader<'_>, _timestamp_ms: i64) -> Result<StateSnapshot> {
    let t_ms = r.i64()?;
    let sites = [get_site_snapshot(r)?, get_site_snapshot(r)?];
    let n = r.u32()? as usize;
    let mut touch_events = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let site = SiteId::from_u8(r.u8()?)?;
        let ts = r.i64()?;
        touch_events.push((site, get_touch(r, ts)?));
    }
    let n = r.u32()? as usize;
    let mut haptic_pulses = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let site = SiteId::from_u8(r.u8()?)?;
        haptic_pulses.push((
            site,
            HapticPulse {
                scheduled_ms: r.i64()?,
                duration_ms: r.i64()?,
            },
        ));
    }
    Ok(StateSnapshot {
        t_ms,
        sites,
        touch_events,
        haptic_pulses,
    })
}
