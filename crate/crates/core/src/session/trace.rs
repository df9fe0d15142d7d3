//! Session trace: one JSON object per simulated event, fields in declaration order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::message::{MessageKind, SiteId};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceRecord {
    /// `arrival` is absent when the channel dropped the message.
    Send {
        t: i64,
        site: SiteId,
        kind: MessageKind,
        ts: i64,
        seq: u64,
        arrival: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hash: Option<String>,
    },
    Deliver {
        t: i64,
        site: SiteId,
        kind: MessageKind,
        ts: i64,
        seq: u64,
    },
    Discard {
        t: i64,
        site: SiteId,
        kind: MessageKind,
        ts: i64,
        seq: u64,
    },
    Viewpoint {
        t: i64,
        site: SiteId,
        position: [f64; 3],
    },
    /// Capture skipped because rig frames were missing.
    Gap { t: i64, site: SiteId },
    /// Frame displayed at `site`.
    Frame {
        t: i64,
        site: SiteId,
        portrait_ts: Option<i64>,
        skeleton_ts: Option<i64>,
        d: Option<f64>,
        alpha_g: f64,
        hash: String,
        stale: bool,
    },
    Appearance {
        t: i64,
        site: SiteId,
        pixels: usize,
        gain: [f64; 3],
        mean_g: [f64; 3],
        mean_i: [f64; 3],
    },
    Touch {
        t: i64,
        site: SiteId,
        local_ts: i64,
        remote_ts: i64,
        overlap_area_cm2: f64,
        local_joints: usize,
        remote_joints: usize,
    },
    Haptic {
        t: i64,
        site: SiteId,
        scheduled_ms: i64,
        duration_ms: i64,
    },
    /// Touch notification from the other site.
    RemoteTouch { t: i64, site: SiteId, ts: i64 },
}

impl TraceRecord {
    pub fn t(&self) -> i64 {
        match self {
            TraceRecord::Send { t, .. }
            | TraceRecord::Deliver { t, .. }
            | TraceRecord::Discard { t, .. }
            | TraceRecord::Viewpoint { t, .. }
            | TraceRecord::Gap { t, .. }
            | TraceRecord::Frame { t, .. }
            | TraceRecord::Appearance { t, .. }
            | TraceRecord::Touch { t, .. }
            | TraceRecord::Haptic { t, .. }
            | TraceRecord::RemoteTouch { t, .. } => *t,
        }
    }
}

/// A frame record, flattened for assertions.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub t: i64,
    pub site: SiteId,
    pub portrait_ts: Option<i64>,
    pub skeleton_ts: Option<i64>,
    pub d: Option<f64>,
    pub alpha_g: f64,
    pub hash: String,
    pub stale: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionTrace {
    pub records: Vec<TraceRecord>,
}

impl SessionTrace {
    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| crate::Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { records })
    }

    /// SHA-256 of the JSON-lines rendering, hex.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.to_jsonl().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_jsonl().as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn frames(&self) -> Vec<FrameRecord> {
        self.records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Frame {
                    t,
                    site,
                    portrait_ts,
                    skeleton_ts,
                    d,
                    alpha_g,
                    hash,
                    stale,
                } => Some(FrameRecord {
                    t: *t,
                    site: *site,
                    portrait_ts: *portrait_ts,
                    skeleton_ts: *skeleton_ts,
                    d: *d,
                    alpha_g: *alpha_g,
                    hash: hash.clone(),
                    stale: *stale,
                }),
                _ => None,
            })
            .collect()
    }

    /// `(site, event time)` of every detected touch.
    pub fn touches(&self) -> Vec<(SiteId, i64)> {
        self.records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Touch { t, site, .. } => Some((*site, *t)),
                _ => None,
            })
            .collect()
    }

    /// `(site, scheduled_ms, duration_ms)` of every haptic pulse.
    pub fn haptics(&self) -> Vec<(SiteId, i64, i64)> {
        self.records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Haptic {
                    site,
                    scheduled_ms,
                    duration_ms,
                    ..
                } => Some((*site, *scheduled_ms, *duration_ms)),
                _ => None,
            })
            .collect()
    }

    pub fn sends(&self, site: SiteId, kind: MessageKind) -> Vec<i64> {
        self.records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Send { site: s, kind: k, ts, .. } if *s == site && *k == kind => Some(*ts),
                _ => None,
            })
            .collect()
    }
}
