//! Per-hop and per-query latency measurement.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::Result;
use crate::synth::{Block, Engine, SynthParams, SynthState};
use crate::synthetic::sweep_velocity;

/// Latency summary in microseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySummary {
    pub p50_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
}

impl LatencySummary {
    /// Nearest-rank percentiles of the samples.
    pub fn from_durations(samples: &mut [Duration]) -> Self {
        assert!(!samples.is_empty(), "no latency samples");
        samples.sort_unstable();
        let rank = |p: f64| {
            let r = ((p / 100.0) * samples.len() as f64).ceil() as usize;
            samples[r.clamp(1, samples.len()) - 1].as_secs_f64() * 1e6
        };
        LatencySummary {
            p50_us: rank(50.0),
            p99_us: rank(99.0),
            max_us: samples[samples.len() - 1].as_secs_f64() * 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopBenchReport {
    pub hops: usize,
    pub hop: LatencySummary,
    pub knn: LatencySummary,
    pub selections: u64,
}

/// Drives `hops` calls of `process_hop` with a velocity sweep up to 300 mm/s,
/// then times the same number of k-NN queries on their own.
pub fn bench_hops(
    engine: &Arc<Engine>,
    params: SynthParams,
    hops: usize,
    seed: u64,
) -> Result<HopBenchReport> {
    let mut state = SynthState::new(Arc::clone(engine), params, seed)?;
    let mut block = Block::default();
    let mut hop_times = Vec::with_capacity(hops);
    for h in 0..hops {
        let v = sweep_velocity(h, 400, 300.0);
        let start = Instant::now();
        state.process_hop_into(v, &mut block);
        hop_times.push(start.elapsed());
        std::hint::black_box(&block);
    }

    let mut knn_times = Vec::with_capacity(hops);
    let mut out = Vec::with_capacity(params.k);
    for h in 0..hops {
        let v = sweep_velocity(h, 400, 300.0);
        let start = Instant::now();
        engine.index().knn_into(v, params.k, &mut out);
        knn_times.push(start.elapsed());
        std::hint::black_box(&out);
    }

    Ok(HopBenchReport {
        hops,
        hop: LatencySummary::from_durations(&mut hop_times),
        knn: LatencySummary::from_durations(&mut knn_times),
        selections: state.stats().selections,
    })
}
