//! Velocity-driven grain scheduling and cross-faded concatenation.
//!
//! Each call to [`SynthState::process_hop`] consumes one velocity sample and
//! produces one 10 ms stereo block. A selected grain is held ("frozen") for
//! `freeze_hops` hops, then a new grain is drawn from the k nearest fragments
//! and blended in over `fade_len` samples.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{AudioClip, SAMPLE_RATE};
use crate::corpus::{Corpus, FRAGMENT_LEN};
use crate::error::{Error, Result};
use crate::index::{GrainIndex, Neighbor};
use crate::trace::VelocityTrace;
use crate::vec2::Vec2;

/// Samples per channel emitted per hop.
pub const HOP: usize = FRAGMENT_LEN;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    /// Neighbors retrieved per selection.
    pub k: usize,
    /// Neighbor fragments added around the selected one (half before, half after).
    pub n: usize,
    /// Hops a selection is held before the next one.
    pub freeze_hops: u32,
    /// Crossfade length in samples.
    pub fade_len: usize,
    /// Below this speed (mm/s) the output ramps to silence.
    pub v_silence: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            k: 25,
            n: 28,
            freeze_hops: 5,
            fade_len: 480,
            v_silence: 1.0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let problem = if self.k < 1 {
            "k must be at least 1"
        } else if !self.n.is_multiple_of(2) {
            "n must be even"
        } else if self.freeze_hops < 1 {
            "freeze_hops must be at least 1"
        } else if self.fade_len == 0 || self.fade_len > HOP {
            "fade_len must be in 1..=480"
        } else if !(self.v_silence >= 0.0) {
            "v_silence must be non-negative"
        } else {
            return Ok(());
        };
        Err(Error::InvalidParams(problem.into()))
    }
}

/// A playable window of the source clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grain {
    pub start: usize,
    pub length: usize,
    pub center_fragment: usize,
}

/// Extends fragment `fragment_id` by `n/2` neighbors on each side, clamped to
/// the `source_fragments` full fragments of the source clip.
pub fn grain_window(source_fragments: usize, fragment_id: usize, n: usize) -> Grain {
    assert!(
        fragment_id < source_fragments,
        "fragment {fragment_id} outside clip of {source_fragments} fragments"
    );
    let half = n / 2;
    let first = fragment_id.saturating_sub(half);
    let last = (fragment_id + half).min(source_fragments - 1);
    Grain {
        start: first * FRAGMENT_LEN,
        length: (last - first + 1) * FRAGMENT_LEN,
        center_fragment: fragment_id,
    }
}

/// Grain around a corpus fragment. Neighbors are taken by position in the
/// source clip whether or not they survived filtering.
pub fn build_grain(corpus: &Corpus, fragment_id: usize, n: usize) -> Grain {
    grain_window(corpus.source_fragment_count(), fragment_id, n)
}

/// Equal-power envelope pair over `len` samples.
///
/// `w_out = cos(pi t / 2L)` and `w_in = sin(pi t / 2L)`. Signals are mixed
/// with the squared envelopes, which sum to one, so blending a signal with
/// itself is the identity and the result never leaves the range of its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossfade {
    gains_in: Vec<f32>,
}

impl Crossfade {
    pub fn new(len: usize) -> Self {
        let gains_in = (0..len)
            .map(|t| {
                let w = Self::envelope_in(t, len);
                (w * w) as f32
            })
            .collect();
        Crossfade { gains_in }
    }

    pub fn len(&self) -> usize {
        self.gains_in.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains_in.is_empty()
    }

    fn envelope_in(t: usize, len: usize) -> f64 {
        (FRAC_PI_2 * t as f64 / len as f64).sin()
    }

    pub fn w_out(&self, t: usize) -> f64 {
        (FRAC_PI_2 * t as f64 / self.len() as f64).cos()
    }

    pub fn w_in(&self, t: usize) -> f64 {
        Self::envelope_in(t, self.len())
    }

    /// Mixing gain applied to the incoming signal at sample `t`.
    pub fn gain_in(&self, t: usize) -> f32 {
        self.gains_in[t]
    }

    /// Blends `old` into `new` sample by sample over `out.len()` samples
    /// (at most the fade length).
    pub fn mix(&self, old: &[f32], new: &[f32], out: &mut [f32]) {
        for (t, o) in out.iter_mut().enumerate() {
            *o = old[t] + self.gains_in[t] * (new[t] - old[t]);
        }
    }
}

/// A corpus and its index, shared read-only between sessions.
#[derive(Debug)]
pub struct Engine {
    corpus: Corpus,
    index: GrainIndex,
}

impl Engine {
    pub fn new(corpus: Corpus) -> Result<Arc<Self>> {
        let index = GrainIndex::embed(&corpus)?;
        Ok(Arc::new(Engine { corpus, index }))
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn index(&self) -> &GrainIndex {
        &self.index
    }

    #[inline]
    fn source(&self, channel: usize, pos: usize) -> f32 {
        self.corpus
            .audio()
            .channel(channel)
            .get(pos)
            .copied()
            .unwrap_or(0.0)
    }
}

/// One hop of stereo output.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub channels: [[f32; HOP]; 2],
}

impl Default for Block {
    fn default() -> Self {
        Block {
            channels: [[0.0; HOP]; 2],
        }
    }
}

impl Block {
    pub fn left(&self) -> &[f32; HOP] {
        &self.channels[0]
    }

    pub fn right(&self) -> &[f32; HOP] {
        &self.channels[1]
    }

    pub fn rms(&self) -> f64 {
        crate::corpus::rms_loudness(&[&self.channels[0][..], &self.channels[1][..]])
    }
}

/// What the scheduler did on the most recent hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopAction {
    /// Output was already silent and stays so.
    Silent,
    /// The active grain was ramped down to silence.
    Mute,
    /// A new grain was selected and crossfaded in.
    Select { fragment: usize },
    /// The next samples of the held grain were copied.
    Continue,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SynthStats {
    pub hops: u64,
    pub selections: u64,
}

/// Per-session scheduler state.
///
/// The generator is ChaCha8 seeded with [`ChaCha8Rng::seed_from_u64`];
/// each selection consumes exactly one `u32` range draw.
#[derive(Debug, Clone)]
pub struct SynthState {
    engine: Arc<Engine>,
    params: SynthParams,
    fade: Crossfade,
    active: Option<Grain>,
    cursor: usize,
    freeze_remaining: u32,
    rng: ChaCha8Rng,
    silent: bool,
    neighbors: Vec<Neighbor>,
    last_action: HopAction,
    stats: SynthStats,
}

impl SynthState {
    /// Fresh state: silent, no active grain.
    pub fn new(engine: Arc<Engine>, params: SynthParams, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(SynthState {
            engine,
            fade: Crossfade::new(params.fade_len),
            params,
            active: None,
            cursor: 0,
            freeze_remaining: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            silent: true,
            neighbors: Vec::with_capacity(params.k),
            last_action: HopAction::Silent,
            stats: SynthStats::default(),
        })
    }

    pub fn params(&self) -> &SynthParams {
        &self.params
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }

    pub fn active_grain(&self) -> Option<Grain> {
        self.active
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn freeze_remaining(&self) -> u32 {
        self.freeze_remaining
    }

    pub fn is_silent(&self) -> bool {
        self.silent
    }

    pub fn last_action(&self) -> HopAction {
        self.last_action
    }

    pub fn stats(&self) -> SynthStats {
        self.stats
    }

    /// Queries the k nearest fragments, draws one uniformly and returns its
    /// grain. Resets the freeze counter.
    pub fn select_grain(&mut self, v_in: Vec2) -> Grain {
        let engine = Arc::clone(&self.engine);
        engine
            .index()
            .knn_into(v_in, self.params.k, &mut self.neighbors);
        let pick = self.rng.random_range(0..self.neighbors.len() as u32) as usize;
        let id = self.neighbors[pick].id;
        self.freeze_remaining = self.params.freeze_hops;
        self.stats.selections += 1;
        build_grain(engine.corpus(), id, self.params.n)
    }

    pub fn process_hop(&mut self, v_in: Vec2) -> Block {
        let mut block = Block::default();
        self.process_hop_into(v_in, &mut block);
        block
    }

    /// Writes the next 480 samples per channel into `out`.
    pub fn process_hop_into(&mut self, v_in: Vec2, out: &mut Block) {
        self.stats.hops += 1;
        let fade_len = self.params.fade_len;

        // NaN speeds fall through to silence as well
        if !(v_in.norm() >= self.params.v_silence) {
            match self.active.take() {
                Some(grain) if !self.silent => {
                    let pos = grain.start + self.cursor;
                    for (c, ch) in out.channels.iter_mut().enumerate() {
                        for (t, o) in ch.iter_mut().enumerate() {
                            *o = if t < fade_len {
                                let gain = (fade_len - t) as f32 / fade_len as f32;
                                self.engine.source(c, pos + t) * gain
                            } else {
                                0.0
                            };
                        }
                    }
                    self.last_action = HopAction::Mute;
                }
                _ => {
                    out.channels = [[0.0; HOP]; 2];
                    self.last_action = HopAction::Silent;
                }
            }
            self.silent = true;
            self.cursor = 0;
            self.freeze_remaining = 0;
            return;
        }

        let exhausted = self
            .active
            .is_none_or(|g| g.length - self.cursor < HOP + fade_len);
        if self.silent || self.freeze_remaining == 0 || exhausted {
            let old_pos = match self.active {
                Some(g) if !self.silent => Some(g.start + self.cursor),
                _ => None,
            };
            let grain = self.select_grain(v_in);
            let mut old = [0.0f32; HOP];
            let mut new = [0.0f32; HOP];
            for (c, ch) in out.channels.iter_mut().enumerate() {
                for (t, slot) in new.iter_mut().enumerate() {
                    *slot = self.engine.source(c, grain.start + t);
                }
                if let Some(pos) = old_pos {
                    for (t, slot) in old[..fade_len].iter_mut().enumerate() {
                        *slot = self.engine.source(c, pos + t);
                    }
                } else {
                    old[..fade_len].fill(0.0);
                }
                self.fade
                    .mix(&old[..fade_len], &new[..fade_len], &mut ch[..fade_len]);
                ch[fade_len..].copy_from_slice(&new[fade_len..]);
            }
            self.active = Some(grain);
            self.cursor = HOP;
            self.silent = false;
            self.last_action = HopAction::Select {
                fragment: grain.center_fragment,
            };
        } else {
            let grain = self.active.expect("active grain while not silent");
            self.freeze_remaining -= 1;
            let pos = grain.start + self.cursor;
            let audio = self.engine.corpus().audio();
            for (c, ch) in out.channels.iter_mut().enumerate() {
                ch.copy_from_slice(&audio.channel(c)[pos..pos + HOP]);
            }
            self.cursor += HOP;
            self.last_action = HopAction::Continue;
        }
    }
}

/// Renders one hop per trace sample with a fresh state.
pub fn render_offline(
    engine: &Arc<Engine>,
    trace: &VelocityTrace,
    params: SynthParams,
    seed: u64,
) -> Result<AudioClip> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut state = SynthState::new(Arc::clone(engine), params, seed)?;
    let frames = trace.len() * HOP;
    let mut left = Vec::with_capacity(frames);
    let mut right = Vec::with_capacity(frames);
    let mut block = Block::default();
    for &v in trace.samples() {
        state.process_hop_into(v, &mut block);
        left.extend_from_slice(block.left());
        right.extend_from_slice(block.right());
    }
    AudioClip::stereo(SAMPLE_RATE, left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PrepParams;

    #[test]
    fn grain_windows() {
        let g = grain_window(6000, 500, 28);
        assert_eq!(g.start, 486 * 480);
        assert_eq!(g.length, 13_920);
        let g = grain_window(6000, 0, 28);
        assert_eq!((g.start, g.length), (0, 7_200));
        let g = grain_window(6000, 5999, 28);
        assert_eq!((g.start, g.length), (5985 * 480, 7_200));
        let g = grain_window(6000, 42, 0);
        assert_eq!((g.start, g.length), (42 * 480, 480));
        let g = grain_window(10, 5, 28);
        assert_eq!((g.start, g.length), (0, 4_800));
    }

    #[test]
    fn params_validation() {
        assert!(SynthParams::default().validate().is_ok());
        let bad = [
            SynthParams {
                k: 0,
                ..Default::default()
            },
            SynthParams {
                n: 3,
                ..Default::default()
            },
            SynthParams {
                freeze_hops: 0,
                ..Default::default()
            },
            SynthParams {
                fade_len: 0,
                ..Default::default()
            },
            SynthParams {
                fade_len: 481,
                ..Default::default()
            },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn envelope_identity() {
        let f = Crossfade::new(480);
        for t in 0..480 {
            let s = f.w_out(t).powi(2) + f.w_in(t).powi(2);
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert_eq!(f.gain_in(0), 0.0);
    }

    #[test]
    fn self_crossfade_is_identity() {
        let f = Crossfade::new(480);
        let x: Vec<f32> = (0..480).map(|i| ((i as f32) * 0.173).sin() * 0.9).collect();
        let mut out = vec![0.0; 480];
        f.mix(&x, &x, &mut out);
        for (a, b) in x.iter().zip(&out) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    fn one_fragment_engine() -> Arc<Engine> {
        let clip = AudioClip::stereo(SAMPLE_RATE, vec![0.25; 4800], vec![-0.25; 4800]).unwrap();
        let mut samples = vec![Vec2::ZERO; 10];
        samples[3] = Vec2::new(20.0, 0.0);
        let trace = VelocityTrace::new(samples).unwrap();
        let (corpus, _) = Corpus::from_clip(
            clip,
            "mem.wav",
            String::new(),
            &trace,
            PrepParams::default(),
            1,
        )
        .unwrap();
        Engine::new(corpus).unwrap()
    }

    #[test]
    fn single_fragment_corpus_always_selects_it() {
        let engine = one_fragment_engine();
        let mut s = SynthState::new(engine, SynthParams::default(), 9).unwrap();
        for _ in 0..50 {
            let g = s.select_grain(Vec2::new(-40.0, 7.0));
            assert_eq!(g.center_fragment, 3);
            assert_eq!((g.start, g.length), (0, 4_800));
        }
    }

    #[test]
    fn starts_silent_and_fades_in() {
        let engine = one_fragment_engine();
        let mut s = SynthState::new(engine, SynthParams::default(), 1).unwrap();
        let b = s.process_hop(Vec2::ZERO);
        assert!(b.channels.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(s.last_action(), HopAction::Silent);
        let b = s.process_hop(Vec2::new(20.0, 0.0));
        assert_eq!(s.last_action(), HopAction::Select { fragment: 3 });
        assert_eq!(b.left()[0], 0.0);
        assert!(b.left().windows(2).all(|w| w[1] >= w[0]));
        assert!((b.left()[479] - 0.25).abs() < 1e-4);
    }

    #[test]
    fn grain_exhaustion_forces_reselection() {
        // 10-fragment clip: grain of fragment 3 is 4800 samples, so after
        // selection at cursor 480 eight more hops fit before
        // fewer than 480 + fade_len samples remain.
        let engine = one_fragment_engine();
        let params = SynthParams {
            freeze_hops: 100,
            ..Default::default()
        };
        let mut s = SynthState::new(engine, params, 1).unwrap();
        let mut actions = Vec::new();
        for _ in 0..10 {
            s.process_hop(Vec2::new(20.0, 0.0));
            actions.push(s.last_action());
        }
        let selects: Vec<usize> = actions
            .iter()
            .enumerate()
            .filter(|(_, a)| matches!(a, HopAction::Select { .. }))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(selects, vec![0, 9]);
    }

    #[test]
    fn empty_trace_rejected() {
        let engine = one_fragment_engine();
        let trace = VelocityTrace::default();
        assert!(render_offline(&engine, &trace, SynthParams::default(), 0).is_err());
    }
}
