//! Shared-clock driver for both sites.

use super::channel::{Channel, ChannelModel, SendOutcome};
use super::message::{MessageKind, Payload, SiteFrameMessage, SiteId, SiteSnapshot, StateSnapshot, SteeringInput};
use super::scenario::Scenario;
use super::site::{DetectionStage, HandSource, Receiver, Sender};
use super::trace::{SessionTrace, TraceRecord};
use super::{cadence_tick, PORTRAIT_HZ, SKELETON_HZ};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::fusion::hand_distance;
use crate::raster::RgbImage;
use crate::spatial_calib::build_global_space;
use crate::touch::{near_screen_joints, HapticPulse, TouchEvent};

const PORTRAIT_LINK: usize = 0;
const CONTROL_LINK: usize = 1;

fn link_of(kind: MessageKind) -> usize {
    match kind {
        MessageKind::Portrait => PORTRAIT_LINK,
        _ => CONTROL_LINK,
    }
}

/// Per-link seed derived from the scenario seed, the link and the model's own seed.
fn link_seed(scenario_seed: u64, from: SiteId, link: usize, model: &ChannelModel) -> u64 {
    let mut z = scenario_seed ^ model.seed.rotate_left(17) ^ ((from.index() as u64) << 8 | link as u64);
    // splitmix64 finalizer
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Both sites, the four links between them, and the trace.
pub struct Session {
    scenario: Scenario,
    senders: [Sender; 2],
    receivers: [Receiver; 2],
    detectors: [DetectionStage; 2],
    /// `links[from][PORTRAIT_LINK | CONTROL_LINK]`.
    links: [[Channel; 2]; 2],
    trace: SessionTrace,
    record: bool,
    now: i64,
    frames: [Option<RgbImage>; 2],
    alpha: [f64; 2],
    pending_events: Vec<(SiteId, TouchEvent)>,
    pending_pulses: Vec<(SiteId, HapticPulse)>,
    timing: Option<FrameTiming>,
}

#[derive(Default)]
struct FrameTiming {
    last_detect: [Duration; 2],
    frames: Vec<Duration>,
}

impl Session {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let (ta, tb) = build_global_space(&scenario.sites.a.screen()?, &scenario.sites.b.screen()?)?;
        let transform = |s: SiteId| if s == SiteId::A { ta } else { tb };
        let sender = |s: SiteId| Sender::new(s, scenario, transform(s), transform(s.other()));
        let detector = |s: SiteId| -> Result<DetectionStage> {
            Ok(DetectionStage::new(
                s,
                scenario.sites.get(s).screen()?,
                transform(s.other()).to_site(&transform(s)),
                scenario.touch,
            ))
        };
        let link = |from: SiteId, l: usize| {
            let mut model = if l == PORTRAIT_LINK {
                scenario.channels.portrait
            } else {
                scenario.channels.skeleton
            };
            model.seed = link_seed(scenario.seed, from, l, &model);
            Channel::new(model)
        };
        Ok(Self {
            scenario: scenario.clone(),
            senders: [sender(SiteId::A)?, sender(SiteId::B)?],
            receivers: [Receiver::new(SiteId::A, scenario)?, Receiver::new(SiteId::B, scenario)?],
            detectors: [detector(SiteId::A)?, detector(SiteId::B)?],
            links: [
                [link(SiteId::A, 0)?, link(SiteId::A, 1)?],
                [link(SiteId::B, 0)?, link(SiteId::B, 1)?],
            ],
            trace: SessionTrace::default(),
            record: true,
            now: 0,
            frames: [None, None],
            alpha: [0.0; 2],
            pending_events: Vec::new(),
            pending_pulses: Vec::new(),
            timing: None,
        })
    }

    /// Disables trace recording (for unbounded live sessions).
    pub fn without_trace(mut self) -> Self {
        self.record = false;
        self
    }

    /// Records the wall time of every fused (non-stale) receiver frame, including that site's latest detection pass.
    pub fn with_frame_timing(mut self) -> Self {
        self.timing = Some(FrameTiming::default());
        self
    }

    /// Receiver frame durations in production order; empty unless timing is enabled.
    pub fn frame_timings(&self) -> &[Duration] {
        self.timing.as_ref().map_or(&[], |t| &t.frames)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// The next millisecond to be simulated.
    pub fn now(&self) -> i64 {
        self.now
    }

    pub fn trace(&self) -> &SessionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> SessionTrace {
        self.trace
    }

    /// Latest frame displayed at `site`.
    pub fn frame(&self, site: SiteId) -> Option<&RgbImage> {
        self.frames[site.index()].as_ref()
    }

    pub fn actuator_log(&self, site: SiteId) -> &[HapticPulse] {
        &self.detectors[site.index()].actuator.log
    }

    pub fn receiver(&self, site: SiteId) -> &Receiver {
        &self.receivers[site.index()]
    }

    fn log(&mut self, r: TraceRecord) {
        if self.record {
            self.trace.push(r);
        }
    }

    fn transmit(&mut self, m: SiteFrameMessage, t: i64) {
        let from = m.site;
        let outcome = self.links[from.index()][link_of(m.kind())].send(&m, t);
        let hash = match &m.payload {
            Payload::Portrait(l) => Some(l.hash_hex()),
            _ => None,
        };
        self.log(TraceRecord::Send {
            t,
            site: from,
            kind: m.kind(),
            ts: m.timestamp_ms,
            seq: m.seq,
            arrival: match outcome {
                SendOutcome::Scheduled { arrival_ms } => Some(arrival_ms),
                SendOutcome::Dropped => None,
            },
            hash,
        });
    }

    fn route(&mut self, m: SiteFrameMessage, t: i64) {
        let to = m.site.other();
        let i = to.index();
        match m.payload {
            Payload::Portrait(layer) => self.receivers[i].push_portrait(m.timestamp_ms, layer),
            Payload::Skeleton(s) => {
                self.detectors[i].push_remote(s.clone());
                self.receivers[i].push_skeleton(s);
            }
            Payload::Viewpoint(vp) => self.senders[i].receive_viewpoint(vp),
            Payload::Touch(ev) => self.log(TraceRecord::RemoteTouch {
                t,
                site: to,
                ts: ev.timestamp_ms,
            }),
            Payload::Steering(_) | Payload::Snapshot(_) | Payload::Error(_) => {}
        }
    }

    /// Simulates millisecond [`Session::now`] and advances the clock.
    pub fn step(&mut self) -> Result<()> {
        let t = self.now;
        for site in SiteId::BOTH {
            let out = self.senders[site.index()].step(t)?;
            if let Some(vp) = out.viewpoint {
                self.log(TraceRecord::Viewpoint {
                    t,
                    site,
                    position: [vp.position.x, vp.position.y, vp.position.z],
                });
            }
            if out.gap {
                self.log(TraceRecord::Gap { t, site });
            }
            if let Some(s) = out.local_skeleton {
                self.detectors[site.index()].push_local(s);
            }
            for m in out.outgoing {
                self.transmit(m, t);
            }
        }

        for from in SiteId::BOTH {
            for l in [PORTRAIT_LINK, CONTROL_LINK] {
                let d = self.links[from.index()][l].deliver(t)?;
                for tr in d.discarded {
                    let m = &tr.message;
                    self.log(TraceRecord::Discard {
                        t,
                        site: from.other(),
                        kind: m.kind(),
                        ts: m.timestamp_ms,
                        seq: m.seq,
                    });
                }
                for tr in d.delivered {
                    let m = tr.message;
                    self.log(TraceRecord::Deliver {
                        t,
                        site: from.other(),
                        kind: m.kind(),
                        ts: m.timestamp_ms,
                        seq: m.seq,
                    });
                    self.route(m, t);
                }
            }
        }

        if cadence_tick(t, SKELETON_HZ) {
            for site in SiteId::BOTH {
                let start = Instant::now();
                let det = self.detectors[site.index()].detect(t);
                if let Some(timing) = &mut self.timing {
                    timing.last_detect[site.index()] = start.elapsed();
                }
                let Some(det) = det else {
                    continue;
                };
                self.log(TraceRecord::Touch {
                    t,
                    site,
                    local_ts: det.local_ts,
                    remote_ts: det.remote_ts,
                    overlap_area_cm2: det.event.overlap_area_cm2,
                    local_joints: det.event.local_joints.len(),
                    remote_joints: det.event.remote_joints.len(),
                });
                self.log(TraceRecord::Haptic {
                    t,
                    site,
                    scheduled_ms: det.pulse.scheduled_ms,
                    duration_ms: det.pulse.duration_ms,
                });
                self.pending_events.push((site, det.event.clone()));
                self.pending_pulses.push((site, det.pulse));
                let m = self.senders[site.index()].touch_message(&det.event);
                self.transmit(m, t);
            }
        }

        if cadence_tick(t, PORTRAIT_HZ) {
            for site in SiteId::BOTH {
                let start = Instant::now();
                let f = self.receivers[site.index()].frame(t)?;
                if let (Some(timing), false) = (&mut self.timing, f.stale) {
                    let d = start.elapsed() + timing.last_detect[site.index()];
                    timing.frames.push(d);
                }
                if let Some((ct, pixels)) = f.appearance {
                    self.log(TraceRecord::Appearance {
                        t,
                        site,
                        pixels,
                        gain: ct.gain,
                        mean_g: ct.mean_g,
                        mean_i: ct.mean_i,
                    });
                }
                if self.record {
                    self.trace.push(TraceRecord::Frame {
                        t,
                        site,
                        portrait_ts: f.portrait_ts,
                        skeleton_ts: f.skeleton_ts,
                        d: f.distance.map(|d| d.d),
                        alpha_g: f.alpha_g,
                        hash: f.frame.hash_hex(),
                        stale: f.stale,
                    });
                }
                self.alpha[site.index()] = f.alpha_g;
                self.frames[site.index()] = Some(f.frame);
            }
        }
        self.now += 1;
        Ok(())
    }

    /// Steps until [`Session::now`] reaches `end_ms`.
    pub fn run_until(&mut self, end_ms: i64) -> Result<()> {
        while self.now < end_ms {
            self.step()?;
        }
        Ok(())
    }

    /// Replaces a site's hand with an operator-steered flat hand.
    pub fn steer(&mut self, site: SiteId, input: SteeringInput) -> Result<()> {
        super::serve::validate_steering(&self.senders[site.index()].screen, &input)?;
        self.senders[site.index()].set_source(HandSource::Steered(input));
        Ok(())
    }

    /// Current state of both sites; touch events and pulses since the previous snapshot.
    pub fn snapshot(&mut self) -> Result<StateSnapshot> {
        let t = self.now;
        let mut sites = Vec::with_capacity(2);
        for site in SiteId::BOTH {
            let sender = &self.senders[site.index()];
            let skeleton = sender.skeleton_at(t)?;
            let d = skeleton
                .as_ref()
                .map(|s| hand_distance(s, &sender.screen, &self.scenario.fusion));
            let near = skeleton.as_ref().map_or(0, |s| {
                near_screen_joints(s, &sender.screen, self.scenario.touch.joint_screen_threshold).len() as u32
            });
            let frame_png = match &self.frames[site.index()] {
                Some(f) => f.to_png()?,
                None => Vec::new(),
            };
            sites.push(SiteSnapshot {
                frame_png,
                d: d.map(|d| d.d),
                alpha_g: d.map_or(0.0, |d| d.alpha(&self.scenario.fusion)),
                near_joints: near,
                steering: match sender.source() {
                    HandSource::Steered(s) => Some(*s),
                    HandSource::Track(_) => None,
                },
            });
        }
        let b = sites.pop().expect("two sites");
        let a = sites.pop().expect("two sites");
        Ok(StateSnapshot {
            t_ms: t,
            sites: [a, b],
            touch_events: std::mem::take(&mut self.pending_events),
            haptic_pulses: std::mem::take(&mut self.pending_pulses),
        })
    }
}

/// Plays `scenario` from 0 to its duration.
pub fn run_scenario(scenario: &Scenario) -> Result<SessionTrace> {
    let mut s = Session::new(scenario)?;
    s.run_until(scenario.duration_ms)?;
    Ok(s.into_trace())
}

/// Frame displayed at `site` at time `t_ms` (the latest frame not after it).
pub fn render_frame(scenario: &Scenario, t_ms: i64, site: SiteId) -> Result<RgbImage> {
    if t_ms < 0 {
        return Err(Error::Validation(format!("time {t_ms} ms is negative")));
    }
    let mut s = Session::new(scenario)?.without_trace();
    s.run_until(t_ms + 1)?;
    Ok(s.frame(site).cloned().expect("a frame is produced at t = 0"))
}
