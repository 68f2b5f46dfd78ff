//! Seeded synthetic recordings for tests, benchmarks and demos.
//!
//! The generated clip is low-passed noise whose per-fragment RMS is exactly
//! `loudness_scale * |v_j|^2` for the matching trace sample, i.e. the ideal
//! rubbing recording where loudness follows squared speed.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{AudioClip, SAMPLE_RATE};
use crate::corpus::{rms_loudness, FRAGMENT_LEN};
use crate::trace::{VelocityTrace, TRACE_PERIOD};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticRecording {
    /// Number of 10 ms fragments.
    pub fragments: usize,
    /// Peak finger speed of the generated stroke, mm/s.
    pub max_speed: f64,
    /// `a_j = loudness_scale * |v_j|^2`.
    pub loudness_scale: f64,
    /// One-pole low-pass coefficient applied to white noise, in `(0, 1]`.
    pub smoothing: f32,
    pub seed: u64,
}

impl Default for SyntheticRecording {
    fn default() -> Self {
        SyntheticRecording {
            fragments: 6000,
            max_speed: 300.0,
            loudness_scale: 0.15 / (300.0 * 300.0),
            smoothing: 0.35,
            seed: 7,
        }
    }
}

impl SyntheticRecording {
    /// Slowly varying circular rubbing motion sweeping speeds from 0 to `max_speed`.
    pub fn trace(&self) -> VelocityTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let phase_speed: f64 = rng.random_range(0.0..TAU);
        let phase_dir: f64 = rng.random_range(0.0..TAU);
        let samples = (0..self.fragments)
            .map(|j| {
                let t = j as f64 * TRACE_PERIOD;
                let envelope = 0.85 + 0.15 * (TAU * t / 17.3 + phase_speed).sin();
                let speed = self.max_speed * 0.5 * (1.0 - (TAU * t / 6.1).cos()) * envelope;
                let angle = TAU * t / 4.7 + phase_dir;
                Vec2::new(speed * angle.cos(), speed * angle.sin())
            })
            .collect();
        VelocityTrace::new(samples).expect("finite synthetic trace")
    }

    /// Clip whose fragment loudness follows the trace exactly.
    pub fn clip(&self, trace: &VelocityTrace) -> AudioClip {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5EED_A0D1);
        let mut state = [0.0f32; 2];
        let total = trace.len() * FRAGMENT_LEN;
        let mut channels = [Vec::with_capacity(total), Vec::with_capacity(total)];
        let mut window = [[0.0f32; FRAGMENT_LEN]; 2];
        for v in trace.samples() {
            for (c, w) in window.iter_mut().enumerate() {
                for s in w.iter_mut() {
                    let white: f32 = rng.random_range(-1.0..1.0);
                    state[c] += self.smoothing * (white - state[c]);
                    *s = state[c];
                }
            }
            let rms = rms_loudness(&[&window[0][..], &window[1][..]]);
            let target = self.loudness_scale * v.norm_sq();
            let gain = if rms > 0.0 {
                (target / rms) as f32
            } else {
                0.0
            };
            for (c, w) in window.iter().enumerate() {
                channels[c].extend(w.iter().map(|s| s * gain));
            }
        }
        let [left, right] = channels;
        AudioClip::stereo(SAMPLE_RATE, left, right).expect("equal channel lengths")
    }

    pub fn generate(&self) -> (AudioClip, VelocityTrace) {
        let trace = self.trace();
        let clip = self.clip(&trace);
        (clip, trace)
    }
}

/// Triangle sweep of speeds between 0 and `max_speed`, rotating in direction,
/// used to drive benchmarks.
pub fn sweep_velocity(hop: usize, period_hops: usize, max_speed: f64) -> Vec2 {
    let phase = (hop % period_hops) as f64 / period_hops as f64;
    let tri = if phase < 0.5 {
        2.0 * phase
    } else {
        2.0 - 2.0 * phase
    };
    let speed = max_speed * tri;
    let angle = TAU * hop as f64 / (period_hops as f64 * 0.37);
    Vec2::new(speed * angle.cos(), speed * angle.sin())
}
