//! Receiver frame timing at desk resolution.

use std::time::Duration;

use super::engine::Session;
use super::scenario::{HandTrack, Keyframe, Scenario};
use super::PORTRAIT_HZ;
use crate::error::{Error, Result};

/// Frame budget at 30 FPS.
pub const FRAME_BUDGET: Duration = Duration::from_millis(33);

/// Receiver frame durations from one benchmark run.
#[derive(Debug, Clone)]
pub struct FrameBenchmark {
    pub timings: Vec<Duration>,
}

impl FrameBenchmark {
    fn sorted(&self) -> Vec<Duration> {
        let mut t = self.timings.clone();
        t.sort_unstable();
        t
    }

    fn quantile(&self, q: f64) -> Duration {
        let t = self.sorted();
        if t.is_empty() {
            return Duration::ZERO;
        }
        t[((t.len() - 1) as f64 * q).round() as usize]
    }

    /// Lower median for even counts.
    pub fn median(&self) -> Duration {
        let t = self.sorted();
        if t.is_empty() {
            return Duration::ZERO;
        }
        t[(t.len() - 1) / 2]
    }

    pub fn p90(&self) -> Duration {
        self.quantile(0.9)
    }

    pub fn max(&self) -> Duration {
        self.timings.iter().copied().max().unwrap_or_default()
    }

    pub fn mean(&self) -> Duration {
        if self.timings.is_empty() {
            return Duration::ZERO;
        }
        self.timings.iter().sum::<Duration>() / self.timings.len() as u32
    }

    pub fn within_budget(&self) -> bool {
        !self.timings.is_empty() && self.median() <= FRAME_BUDGET
    }
}

impl Scenario {
    /// Both hands sweep between 0.35 m and 0.05 m from their screens for
    /// `duration_ms`, keeping the blend band and near-screen joints busy.
    pub fn hover(duration_ms: i64) -> Self {
        let sweep = |x: f64| HandTrack::Keyframes {
            keyframes: (0..=duration_ms / 1000 + 1)
                .map(|k| Keyframe {
                    t_ms: k * 1000,
                    palm: Some([x, 0.0, if k % 2 == 0 { 0.35 } else { 0.05 }]),
                    joints: None,
                })
                .collect(),
        };
        let mut s = Scenario::canonical_high_five();
        s.duration_ms = duration_ms;
        s.sites.a.hand = sweep(0.1);
        s.sites.b.hand = sweep(-0.1);
        s
    }
}

/// Times `frames` fused receiver frames (both sites) of `scenario`, which must
/// run long enough to produce them.
pub fn benchmark_receiver_frames(scenario: &Scenario, frames: usize) -> Result<FrameBenchmark> {
    let mut session = Session::new(scenario)?.without_trace().with_frame_timing();
    while session.frame_timings().len() < frames {
        if session.now() >= scenario.duration_ms {
            return Err(Error::Validation(format!(
                "scenario produced {} fused frames, {frames} requested",
                session.frame_timings().len()
            )));
        }
        session.step()?;
    }
    Ok(FrameBenchmark {
        timings: session.frame_timings()[..frames].to_vec(),
    })
}

/// Default benchmark: `frames` receiver frames of [`Scenario::hover`].
pub fn benchmark_default(frames: usize) -> Result<FrameBenchmark> {
    // Two sites per portrait tick; the first frames are stale until the links fill.
    let ticks = frames.div_ceil(2) as i64;
    let duration = 1000 + ticks * 1000 / PORTRAIT_HZ + 1000;
    benchmark_receiver_frames(&Scenario::hover(duration), frames)
}
