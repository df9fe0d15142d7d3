//! Simulated one-way network link between sites.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::message::{MessageKind, SiteFrameMessage, SiteId};
use crate::error::{Error, Result};

pub const PORTRAIT_LATENCY_MS: i64 = 400;
pub const SKELETON_LATENCY_MS: i64 = 250;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    pub base_latency_ms: i64,
    /// Half-width of the uniform jitter, milliseconds.
    #[serde(default)]
    pub jitter_ms: i64,
    #[serde(default)]
    pub drop_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ChannelModel {
    pub fn ideal(base_latency_ms: i64) -> Self {
        Self {
            base_latency_ms,
            jitter_ms: 0,
            drop_rate: 0.0,
            seed: 0,
        }
    }

    pub fn portrait_default() -> Self {
        Self::ideal(PORTRAIT_LATENCY_MS)
    }

    pub fn skeleton_default() -> Self {
        Self::ideal(SKELETON_LATENCY_MS)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_latency_ms < 0 {
            return Err(Error::field("base_latency_ms", "must be >= 0"));
        }
        if self.jitter_ms < 0 {
            return Err(Error::field("jitter_ms", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.drop_rate) {
            return Err(Error::field("drop_rate", "must be in [0, 1]"));
        }
        Ok(())
    }
}

/// A message together with its simulated send and arrival times.
#[derive(Debug, Clone, PartialEq)]
pub struct Transit {
    pub message: SiteFrameMessage,
    pub sent_ms: i64,
    pub arrival_ms: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendOutcome {
    Scheduled { arrival_ms: i64 },
    Dropped,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Delivery {
    /// In arrival order.
    pub delivered: Vec<Transit>,
    /// Arrived after a newer message of the same stream.
    pub discarded: Vec<Transit>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelStats {
    pub sent: u64,
    pub dropped: u64,
    pub delivered: u64,
    pub discarded: u64,
}

struct Queued {
    bytes: Vec<u8>,
    sent_ms: i64,
}

/// Carries encoded messages; payloads cross the link as bytes.
pub struct Channel {
    pub model: ChannelModel,
    rng: ChaCha8Rng,
    queue: BTreeMap<(i64, u64), Queued>,
    order: u64,
    last_seq: HashMap<(SiteId, MessageKind), u64>,
    stats: ChannelStats,
}

impl Channel {
    pub fn new(model: ChannelModel) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            queue: BTreeMap::new(),
            order: 0,
            last_seq: HashMap::new(),
            stats: ChannelStats::default(),
        })
    }

    pub fn stats(&self) -> ChannelStats {
        self.stats
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    pub fn next_arrival(&self) -> Option<i64> {
        self.queue.keys().next().map(|k| k.0)
    }

    pub fn send(&mut self, message: &SiteFrameMessage, now_ms: i64) -> SendOutcome {
        // Both draws happen for every message so the schedule of later messages
        // does not depend on which earlier ones were dropped.
        let j = self.model.jitter_ms;
        let jitter = if j > 0 { self.rng.random_range(-j..=j) } else { 0 };
        let u: f64 = self.rng.random();
        self.stats.sent += 1;
        if u < self.model.drop_rate {
            self.stats.dropped += 1;
            return SendOutcome::Dropped;
        }
        let arrival_ms = (now_ms + self.model.base_latency_ms + jitter).max(now_ms);
        self.queue.insert(
            (arrival_ms, self.order),
            Queued {
                bytes: message.encode(),
                sent_ms: now_ms,
            },
        );
        self.order += 1;
        SendOutcome::Scheduled { arrival_ms }
    }

    /// Removes every message with arrival time `<= now_ms`.
    pub fn deliver(&mut self, now_ms: i64) -> Result<Delivery> {
        let later = self.queue.split_off(&(now_ms + 1, 0));
        let due = std::mem::replace(&mut self.queue, later);
        let mut out = Delivery::default();
        for ((arrival_ms, _), q) in due {
            let message = SiteFrameMessage::decode(&q.bytes)?;
            let key = (message.site, message.kind());
            let t = Transit {
                message,
                sent_ms: q.sent_ms,
                arrival_ms,
            };
            match self.last_seq.get(&key) {
                Some(&last) if t.message.seq <= last => {
                    self.stats.discarded += 1;
                    out.discarded.push(t);
                }
                _ => {
                    self.last_seq.insert(key, t.message.seq);
                    self.stats.delivered += 1;
                    out.delivered.push(t);
                }
            }
        }
        Ok(out)
    }
}

/// Sends `messages` at `now_ms` and returns what has arrived by then.
pub fn channel_deliver(channel: &mut Channel, messages: &[SiteFrameMessage], now_ms: i64) -> Result<Vec<SiteFrameMessage>> {
    for m in messages {
        channel.send(m, now_ms);
    }
    Ok(channel.deliver(now_ms)?.delivered.into_iter().map(|t| t.message).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::message::{Payload, SteeringInput};
    use proptest::prelude::*;

    fn msg(seq: u64) -> SiteFrameMessage {
        SiteFrameMessage::new(
            SiteId::A,
            seq as i64,
            seq,
            Payload::Steering(SteeringInput { x: 0.0, y: 0.0, distance: seq as f64 }),
        )
    }

    fn schedule(model: ChannelModel, n: u64) -> Vec<SendOutcome> {
        let mut c = Channel::new(model).unwrap();
        (0..n).map(|i| c.send(&msg(i), i as i64)).collect()
    }

    #[test]
    fn fixed_latency_arrives_on_time() {
        let mut c = Channel::new(ChannelModel::portrait_default()).unwrap();
        assert_eq!(c.send(&msg(0), 0), SendOutcome::Scheduled { arrival_ms: 400 });
        assert!(c.deliver(399).unwrap().delivered.is_empty());
        let d = c.deliver(400).unwrap();
        assert_eq!(d.delivered.len(), 1);
        assert_eq!(d.delivered[0].arrival_ms, 400);
    }

    #[test]
    fn full_drop_delivers_nothing() {
        let model = ChannelModel {
            drop_rate: 1.0,
            ..ChannelModel::ideal(10)
        };
        let mut c = Channel::new(model).unwrap();
        let out = channel_deliver(&mut c, &(0..100).map(msg).collect::<Vec<_>>(), 0).unwrap();
        assert!(out.is_empty());
        assert!(c.deliver(i64::MAX - 1).unwrap().delivered.is_empty());
        assert_eq!(c.stats().dropped, 100);
    }

    #[test]
    fn seeded_jitter_is_reproducible() {
        let model = ChannelModel {
            base_latency_ms: 100,
            jitter_ms: 50,
            drop_rate: 0.0,
            seed: 42,
        };
        let a = schedule(model, 1000);
        assert_eq!(a, schedule(model, 1000));
        let arrivals: Vec<i64> = a
            .iter()
            .enumerate()
            .map(|(i, o)| match o {
                SendOutcome::Scheduled { arrival_ms } => arrival_ms - i as i64,
                SendOutcome::Dropped => panic!("dropped"),
            })
            .collect();
        assert!(arrivals.iter().all(|l| (50..=150).contains(l)));
        assert!(arrivals.iter().any(|&l| l != 100));
        assert_ne!(a, schedule(ChannelModel { seed: 43, ..model }, 1000));
    }

    #[test]
    fn overtaken_messages_are_discarded() {
        let model = ChannelModel {
            base_latency_ms: 100,
            jitter_ms: 80,
            drop_rate: 0.0,
            seed: 3,
        };
        let mut c = Channel::new(model).unwrap();
        for i in 0..200 {
            c.send(&msg(i), i as i64);
        }
        let d = c.deliver(10_000).unwrap();
        assert!(!d.discarded.is_empty());
        assert_eq!(d.delivered.len() + d.discarded.len(), 200);
        assert!(d.delivered.windows(2).all(|w| w[0].message.seq < w[1].message.seq));
        assert!(d.delivered.windows(2).all(|w| w[0].arrival_ms <= w[1].arrival_ms));
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(Channel::new(ChannelModel::ideal(-1)).is_err());
        assert!(Channel::new(ChannelModel { jitter_ms: -2, ..ChannelModel::ideal(0) }).is_err());
        assert!(Channel::new(ChannelModel { drop_rate: 1.5, ..ChannelModel::ideal(0) }).is_err());
    }

    proptest! {
        #[test]
        fn lossless_links_deliver_everything_once_and_never_early(
            latency in 0i64..500,
            jitter in 0i64..100,
            seed in any::<u64>(),
            gaps in proptest::collection::vec(0i64..40, 1..80),
        ) {
            let model = ChannelModel { base_latency_ms: latency, jitter_ms: jitter, drop_rate: 0.0, seed };
            let mut c = Channel::new(model).unwrap();
            let mut t = 0;
            let mut sent = 0u64;
            let mut seen = 0u64;
            for (i, g) in gaps.iter().enumerate() {
                c.send(&msg(i as u64), t);
                sent += 1;
                t += g;
                let d = c.deliver(t).unwrap();
                for tr in d.delivered.iter().chain(&d.discarded) {
                    prop_assert!(tr.arrival_ms <= t);
                    prop_assert!(tr.arrival_ms >= tr.sent_ms);
                }
                seen += (d.delivered.len() + d.discarded.len()) as u64;
            }
            let d = c.deliver(t + latency + jitter).unwrap();
            seen += (d.delivered.len() + d.discarded.len()) as u64;
            prop_assert_eq!(seen, sent);
            prop_assert_eq!(c.in_flight(), 0);
            if jitter == 0 {
                prop_assert_eq!(c.stats().discarded, 0);
            }
        }
    }
}
