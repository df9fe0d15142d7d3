//! Two-site session: sender/receiver pipelines over simulated links, scenario
//! playback with traces, and the live service endpoint.
//!
//! Scenario mode is a single-threaded discrete-event simulation on a shared
//! millisecond clock. Each millisecond runs, in order: sender stages (capture,
//! tracking, portrait rendering), link deliveries, touch detection, and
//! receiver frames.

mod bench;
mod channel;
mod engine;
mod message;
mod pairing;
mod scenario;
mod serve;
mod site;
mod trace;

pub use bench::{benchmark_default, benchmark_receiver_frames, FrameBenchmark, FRAME_BUDGET};
pub use channel::{
    channel_deliver, Channel, ChannelModel, ChannelStats, Delivery, SendOutcome, Transit, PORTRAIT_LATENCY_MS,
    SKELETON_LATENCY_MS,
};
pub use engine::{render_frame, run_scenario, Session};
pub use message::{MessageKind, Payload, SiteFrameMessage, SiteId, SiteSnapshot, StateSnapshot, SteeringInput, MAX_FRAME_BYTES};
pub use pairing::pair_closest;
pub use scenario::{
    flat_hand, AppearanceConfig, ChannelsConfig, HandTrack, Keyframe, PalmPose, RenderConfig, Scenario, SiteScenario, Sites,
    ViewpointConfig,
};
pub use serve::{
    serve, serve_on, validate_steering, Handshake, HandshakeReply, ServeClient, ServeConfig, ServeHandle, DEFAULT_SNAPSHOT_HZ,
    PROTOCOL_NAME, PROTOCOL_VERSION,
};
pub use site::{
    room_background, Detection, DetectionStage, HandSource, Participant, Receiver, ReceiverFrame, Sender, SenderOutput,
    MAX_PAIR_SKEW_MS, MAX_REMOTE_AGE_MS,
};
pub use trace::{FrameRecord, SessionTrace, TraceRecord};

pub const PORTRAIT_HZ: i64 = 30;
pub const SKELETON_HZ: i64 = 50;

/// Whether `t_ms` is one of the stream's capture times `floor(k * 1000 / hz)`.
pub fn cadence_tick(t_ms: i64, hz: i64) -> bool {
    if t_ms < 0 {
        return false;
    }
    let k = (t_ms * hz + 999) / 1000;
    k * 1000 / hz == t_ms
}

/// All capture times in `[0, duration_ms)`.
pub fn cadence_times(hz: i64, duration_ms: i64) -> Vec<i64> {
    (0..)
        .map(|k: i64| k * 1000 / hz)
        .take_while(|&t| t < duration_ms)
        .collect()
}
