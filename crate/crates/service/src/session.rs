//! One interactive sonification session: pointer events in, audio frames out.

use std::collections::VecDeque;
use std::sync::Arc;

use rubsynth::velocity::DEFAULT_SMOOTHING_WINDOW;
use rubsynth::{Block, Engine, PointerEvent, SynthParams, SynthState, Vec2, VelocityTracker};

use crate::protocol::encode_frame;

const MM_PER_INCH: f64 = 25.4;
/// Hops without pointer input after which the pointer counts as lifted.
pub const IDLE_HOPS: u32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub corpus_id: String,
    pub dpi: f64,
    pub seed: Option<u64>,
}

/// A pointer event as sent by the client, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerPx {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub hops_emitted: u64,
    pub underruns: u64,
    pub selections: u64,
    pub dropped_events: u64,
}

#[derive(Debug)]
pub struct Session {
    id: String,
    state: SynthState,
    tracker: VelocityTracker,
    mm_per_px: f64,
    pending: VecDeque<PointerPx>,
    velocity: Vec2,
    idle_hops: u32,
    last_event_t: Option<f64>,
    sequence: u32,
    stats: SessionStats,
    block: Block,
}

impl Session {
    pub fn new(
        id: String,
        engine: Arc<Engine>,
        params: SynthParams,
        dpi: f64,
        seed: u64,
    ) -> rubsynth::Result<Self> {
        Ok(Session {
            id,
            state: SynthState::new(engine, params, seed)?,
            tracker: VelocityTracker::new(DEFAULT_SMOOTHING_WINDOW)?,
            mm_per_px: MM_PER_INCH / dpi,
            pending: VecDeque::new(),
            velocity: Vec2::ZERO,
            idle_hops: 0,
            last_event_t: None,
            sequence: 0,
            stats: SessionStats::default(),
            block: Block::default(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn stats(&self) -> SessionStats {
        SessionStats {
            selections: self.state.stats().selections,
            ..self.stats
        }
    }

    pub fn last_event_t(&self) -> Option<f64> {
        self.last_event_t
    }

    /// Velocity used by the most recent hop, mm/s.
    pub fn velocity(&self) -> Vec2 {
        self.velocity
    }

    pub fn synth(&self) -> &SynthState {
        &self.state
    }

    /// Queues a pointer event; it is folded into the velocity stream at the next hop.
    pub fn ingest_pointer(&mut self, event: PointerPx) {
        self.pending.push_back(event);
    }

    pub fn record_underrun(&mut self) {
        self.stats.underruns += 1;
    }

    fn consume_pending(&mut self) {
        let mut accepted = false;
        while let Some(ev) = self.pending.pop_front() {
            let position = Vec2::new(ev.x * self.mm_per_px, ev.y * self.mm_per_px);
            match self.tracker.push(PointerEvent::new(ev.t, position)) {
                Ok(()) => {
                    accepted = true;
                    self.last_event_t = Some(ev.t);
                }
                Err(_) => self.stats.dropped_events += 1,
            }
        }
        if let Some(v) = self.tracker.drain().next_back() {
            self.velocity = v;
        }
        if accepted {
            self.idle_hops = 0;
        } else {
            self.idle_hops = self.idle_hops.saturating_add(1);
            if self.idle_hops > IDLE_HOPS {
                self.velocity = Vec2::ZERO;
            }
        }
    }

    /// Runs one hop and returns the next block with its sequence number.
    pub fn next_block(&mut self) -> (u32, &Block) {
        self.consume_pending();
        self.state.process_hop_into(self.velocity, &mut self.block);
        let seq = self.sequence;
        self.sequence = self.sequence.wrapping_add(1);
        self.stats.hops_emitted += 1;
        (seq, &self.block)
    }

    /// Runs one hop and returns the encoded audio frame.
    pub fn emit_hop(&mut self) -> Vec<u8> {
        let (seq, block) = self.next_block();
        encode_frame(seq, block)
    }
}
