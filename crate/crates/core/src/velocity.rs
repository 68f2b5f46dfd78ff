//! Pointer trajectory to 100 Hz velocity: resampling, smoothing and
//! numerical differentiation.
//!
//! The batch functions and [`VelocityTracker`] share the same per-sample
//! arithmetic, so a tracker fed a stroke event by event produces the same
//! velocities, bit for bit, as the batch chain over the whole stroke
//! (except for the trailing samples the tracker has not yet finalized).

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::trace::{VelocityTrace, TRACE_PERIOD};
use crate::vec2::Vec2;

/// Timestamps closer than this to a grid instant are treated as on-grid.
pub const GRID_EPS: f64 = 1e-9;
/// Default centered moving-average window.
pub const DEFAULT_SMOOTHING_WINDOW: usize = 3;
/// A pause between events longer than this starts a new stroke.
pub const STROKE_GAP: f64 = 0.1;

/// A pointer position sample, in seconds and millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerEvent {
    pub t: f64,
    pub position: Vec2,
}

impl PointerEvent {
    pub fn new(t: f64, position: Vec2) -> Self {
        PointerEvent { t, position }
    }
}

fn grid_time(t0: f64, g: usize) -> f64 {
    t0 + g as f64 * TRACE_PERIOD
}

/// Position at `t`, interpolated on the segment starting at `*seg`.
/// Advances `*seg` monotonically; callers query increasing `t`.
fn sample_at(events: &[PointerEvent], seg: &mut usize, t: f64) -> Vec2 {
    while *seg + 2 < events.len() && events[*seg + 1].t < t {
        *seg += 1;
    }
    let a = events[*seg];
    let b = events[*seg + 1];
    if (t - a.t).abs() <= GRID_EPS {
        a.position
    } else if (t - b.t).abs() <= GRID_EPS {
        b.position
    } else {
        a.position + (b.position - a.position) * ((t - a.t) / (b.t - a.t))
    }
}

fn smooth_at(get: impl Fn(usize) -> Vec2, len: usize, i: usize, half: usize) -> Vec2 {
    let lo = i.saturating_sub(half);
    let hi = (i + half).min(len - 1);
    let mut sum = Vec2::ZERO;
    for j in lo..=hi {
        sum = sum + get(j);
    }
    let count = (hi - lo + 1) as f64;
    Vec2::new(sum.x / count, sum.y / count)
}

fn central(prev: Vec2, next: Vec2) -> Vec2 {
    Vec2::new(
        (next.x - prev.x) / (2.0 * TRACE_PERIOD),
        (next.y - prev.y) / (2.0 * TRACE_PERIOD),
    )
}

fn one_sided(from: Vec2, to: Vec2) -> Vec2 {
    Vec2::new(
        (to.x - from.x) / TRACE_PERIOD,
        (to.y - from.y) / TRACE_PERIOD,
    )
}

fn check_window(window: usize) -> Result<usize> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::EvenWindow(window));
    }
    Ok(window / 2)
}

/// Linearly interpolates positions onto the 0.01 s grid spanning the events.
pub fn resample_positions(events: &[PointerEvent]) -> Result<Vec<Vec2>> {
    if events.len() < 2 {
        return Err(Error::TooFewEvents(format!(
            "{} event(s), need at least 2",
            events.len()
        )));
    }
    if let Some(i) = events.windows(2).position(|w| !(w[1].t > w[0].t)) {
        return Err(Error::NonMonotonicEvents(i + 1));
    }
    let t0 = events[0].t;
    let t_last = events[events.len() - 1].t;
    if t_last - t0 < 2.0 * TRACE_PERIOD - GRID_EPS {
        return Err(Error::TooFewEvents(format!(
            "events span {:.4} s, need at least 0.02 s",
            t_last - t0
        )));
    }
    let mut seg = 0;
    let mut out = Vec::new();
    let mut g = 0;
    loop {
        let t = grid_time(t0, g);
        if t > t_last + GRID_EPS {
            break;
        }
        out.push(sample_at(events, &mut seg, t));
        g += 1;
    }
    Ok(out)
}

/// Centered moving average with truncated windows at the edges.
pub fn smooth_positions(positions: &[Vec2], window: usize) -> Result<Vec<Vec2>> {
    let half = check_window(window)?;
    Ok((0..positions.len())
        .map(|i| smooth_at(|j| positions[j], positions.len(), i, half))
        .collect())
}

/// Central differences inside, one-sided differences at both ends.
pub fn differentiate(positions: &[Vec2]) -> Result<VelocityTrace> {
    let n = positions.len();
    if n < 3 {
        return Err(Error::TooFewSamples(n));
    }
    let mut out = Vec::with_capacity(n);
    out.push(one_sided(positions[0], positions[1]));
    for i in 1..n - 1 {
        out.push(central(positions[i - 1], positions[i + 1]));
    }
    out.push(one_sided(positions[n - 2], positions[n - 1]));
    VelocityTrace::new(out)
}

/// The full chain: resample, smooth, differentiate.
pub fn velocity_from_positions(events: &[PointerEvent], window: usize) -> Result<VelocityTrace> {
    let grid = resample_positions(events)?;
    let smoothed = smooth_positions(&grid, window)?;
    differentiate(&smoothed)
}

/// Incremental form of [`velocity_from_positions`] for live pointer input.
///
/// Velocity at grid index `g` is emitted once the resampled grid reaches
/// `g + window/2 + 1`, i.e. once no later event can change it.
#[derive(Debug, Clone)]
pub struct VelocityTracker {
    half: usize,
    events: Vec<PointerEvent>,
    seg: usize,
    t0: f64,
    raw: VecDeque<Vec2>,
    raw_base: usize,
    raw_len: usize,
    next_velocity: usize,
    ready: Vec<Vec2>,
}

impl VelocityTracker {
    pub fn new(window: usize) -> Result<Self> {
        Ok(VelocityTracker {
            half: check_window(window)?,
            events: Vec::new(),
            seg: 0,
            t0: 0.0,
            raw: VecDeque::new(),
            raw_base: 0,
            raw_len: 0,
            next_velocity: 0,
            ready: Vec::new(),
        })
    }

    pub fn last_event_time(&self) -> Option<f64> {
        self.events.last().map(|e| e.t)
    }

    /// Feeds one event. Events whose timestamp does not strictly increase are
    /// rejected and leave the tracker unchanged.
    pub fn push(&mut self, event: PointerEvent) -> Result<()> {
        if let Some(last) = self.last_event_time() {
            if !(event.t > last) || !event.t.is_finite() {
                return Err(Error::NonMonotonicEvents(self.events.len()));
            }
            if event.t - last > STROKE_GAP {
                self.reset_stroke();
            }
        }
        if self.events.is_empty() {
            self.t0 = event.t;
        }
        self.events.push(event);
        self.extend_grid();
        self.finalize();
        self.trim();
        Ok(())
    }

    /// Velocities finalized since the last call, oldest first.
    pub fn drain(&mut self) -> std::vec::Drain<'_, Vec2> {
        self.ready.drain(..)
    }

    fn reset_stroke(&mut self) {
        self.events.clear();
        self.seg = 0;
        self.raw.clear();
        self.raw_base = 0;
        self.raw_len = 0;
        self.next_velocity = 0;
    }

    fn extend_grid(&mut self) {
        if self.events.len() < 2 {
            return;
        }
        let t_last = self.events[self.events.len() - 1].t;
        loop {
            let t = grid_time(self.t0, self.raw_len);
            if t > t_last + GRID_EPS {
                break;
            }
            let p = sample_at(&self.events, &mut self.seg, t);
            self.raw.push_back(p);
            self.raw_len += 1;
        }
    }

    fn smoothed(&self, i: usize) -> Vec2 {
        let base = self.raw_base;
        smooth_at(|j| self.raw[j - base], self.raw_len, i, self.half)
    }

    fn finalize(&mut self) {
        while self.raw_len >= self.next_velocity + self.half + 2 {
            let g = self.next_velocity;
            let v = if g == 0 {
                one_sided(self.smoothed(0), self.smoothed(1))
            } else {
                central(self.smoothed(g - 1), self.smoothed(g + 1))
            };
            self.ready.push(v);
            self.next_velocity += 1;
        }
    }

    fn trim(&mut self) {
        // smoothing of index next_velocity - 1 reaches back `half` samples
        let keep_from = self.next_velocity.saturating_sub(self.half + 1);
        while self.raw_base < keep_from {
            self.raw.pop_front();
            self.raw_base += 1;
        }
        if self.seg > 0 {
            self.events.drain(..self.seg);
            self.seg = 0;
        }
    }
}
