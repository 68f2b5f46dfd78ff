use std::sync::Arc;

use rubsynth::synthetic::SyntheticRecording;
use rubsynth::{
    render_offline, velocity_from_positions, Corpus, Engine, PointerEvent, PrepParams, SynthParams,
    Vec2, VelocityTrace, HOP,
};
use rubsynth_service::{decode_frame, Library, PointerPx, ServiceError, SessionConfig};

const DPI: f64 = 127.0; // 5 px per mm

fn engine() -> Arc<Engine> {
    let (clip, trace) = SyntheticRecording {
        fragments: 1500,
        seed: 31,
        ..Default::default()
    }
    .generate();
    let (corpus, _) = Corpus::from_clip(
        clip,
        "s.wav",
        String::new(),
        &trace,
        PrepParams::default(),
        25,
    )
    .unwrap();
    Engine::new(corpus).unwrap()
}

fn library(capacity: usize) -> Library {
    let mut lib = Library::new(SynthParams::default(), capacity);
    lib.insert("leather", engine(), None);
    lib
}

fn config(seed: u64) -> SessionConfig {
    SessionConfig {
        corpus_id: "leather".into(),
        dpi: DPI,
        seed: Some(seed),
    }
}

/// Pointer positions in px on the 100 Hz grid: a stroke with speed changes.
fn scripted_events(hops: usize) -> Vec<PxEvent> {
    (0..hops)
        .map(|h| {
            let t = h as f64 * 0.01;
            let x = 400.0 * t + 150.0 * (1.7 * t).sin() * t;
            let y = 90.0 * (0.8 * t).sin();
            PxEvent { t, x, y }
        })
        .collect()
}

#[derive(Clone, Copy)]
struct PxEvent {
    t: f64,
    x: f64,
    y: f64,
}

fn drive(seed: u64, events: &[PxEvent], hops: usize) -> Vec<Vec<u8>> {
    let lib = library(4);
    let mut slot = lib.open_session(&config(seed)).unwrap();
    let mut frames = Vec::with_capacity(hops);
    let mut next = 0;
    for h in 0..hops {
        let now = h as f64 * 0.01;
        while next < events.len() && events[next].t <= now + 1e-9 {
            let e = events[next];
            slot.session.ingest_pointer(PointerPx {
                t: e.t,
                x: e.x,
                y: e.y,
            });
            next += 1;
        }
        frames.push(slot.session.emit_hop());
    }
    frames
}

#[test]
fn service_matches_offline_render_frame_for_frame() {
    let hops = 400;
    let events = scripted_events(hops);
    let frames = drive(17, &events, hops);

    // Equivalent trace: the batch velocity chain over the same stroke in mm,
    // delayed by the two samples the live tracker waits for.
    let mm: Vec<PointerEvent> = events
        .iter()
        .map(|e| PointerEvent::new(e.t, Vec2::new(e.x * 25.4 / DPI, e.y * 25.4 / DPI)))
        .collect();
    let batch = velocity_from_positions(&mm, 3).unwrap();
    let mut samples = vec![Vec2::ZERO; 2];
    samples.extend_from_slice(&batch.samples()[..hops - 2]);
    let trace = VelocityTrace::new(samples).unwrap();

    let lib = library(1);
    let engine = &lib.get("leather").unwrap().engine;
    let offline = render_offline(engine, &trace, SynthParams::default(), 17).unwrap();

    assert_eq!(frames.len(), hops);
    for (h, frame) in frames.iter().enumerate() {
        let (seq, block) = decode_frame(frame).unwrap();
        assert_eq!(seq as usize, h);
        let range = h * HOP..(h + 1) * HOP;
        assert_eq!(
            &block.left()[..],
            &offline.channel(0)[range.clone()],
            "hop {h}"
        );
        assert_eq!(&block.right()[..], &offline.channel(1)[range], "hop {h}");
    }
    // the stroke is audible
    assert!(offline.peak() > 0.0);
}

#[test]
fn scripted_session_is_reproducible() {
    let events = scripted_events(200);
    assert_eq!(drive(3, &events, 200), drive(3, &events, 200));
    assert_ne!(drive(3, &events, 200), drive(4, &events, 200));
}

#[test]
fn one_second_is_one_hundred_frames() {
    let frames = drive(1, &[], 100);
    let seqs: Vec<u32> = frames.iter().map(|f| decode_frame(f).unwrap().0).collect();
    assert_eq!(seqs, (0..100).collect::<Vec<_>>());
    assert!(frames.iter().all(|f| f.len() == 3_856));
}

#[test]
fn sessions_are_isolated() {
    let lib = library(4);
    let mut a = lib.open_session(&config(9)).unwrap();
    let mut b = lib.open_session(&config(9)).unwrap();
    let mut quiet = lib.open_session(&config(9)).unwrap();
    let events = scripted_events(150);
    for (h, e) in events.iter().enumerate() {
        a.session.ingest_pointer(PointerPx {
            t: e.t,
            x: e.x,
            y: e.y,
        });
        let fa = a.session.emit_hop();
        // b gets the same stroke, quiet gets nothing
        b.session.ingest_pointer(PointerPx {
            t: e.t,
            x: e.x,
            y: e.y,
        });
        let fb = b.session.emit_hop();
        let fq = quiet.session.emit_hop();
        assert_eq!(fa, fb, "hop {h}");
        let (_, block) = decode_frame(&fq).unwrap();
        assert!(block.channels.iter().flatten().all(|&s| s == 0.0));
    }
    assert_eq!(lib.active_sessions(), 3);
}

#[test]
fn admission_errors() {
    let lib = library(1);
    let missing = SessionConfig {
        corpus_id: "velvet".into(),
        ..config(1)
    };
    let err = lib.open_session(&missing).unwrap_err();
    assert!(matches!(err, ServiceError::UnknownCorpus(_)));
    assert_eq!(err.code(), "unknown_corpus");
    assert_eq!(lib.active_sessions(), 0);

    let bad_dpi = SessionConfig {
        dpi: 0.0,
        ..config(1)
    };
    assert!(matches!(
        lib.open_session(&bad_dpi),
        Err(ServiceError::InvalidDpi(_))
    ));

    let first = lib.open_session(&config(1)).unwrap();
    let err = lib.open_session(&config(2)).unwrap_err();
    assert_eq!(err.code(), "capacity");
    drop(first);
    assert!(lib.open_session(&config(2)).is_ok());
}

#[test]
fn sixty_hz_pointer_stream_has_no_velocity_gaps() {
    let lib = library(1);
    let mut slot = lib.open_session(&config(5)).unwrap();
    // 60 Hz events, 250 mm/s along x
    let mut t_event = 0.0;
    let mut speeds = Vec::new();
    for h in 0..300 {
        let now = h as f64 * 0.01;
        while t_event <= now {
            let x_mm = 250.0 * t_event;
            slot.session.ingest_pointer(PointerPx {
                t: t_event,
                x: x_mm * DPI / 25.4,
                y: 0.0,
            });
            t_event += 1.0 / 60.0;
        }
        slot.session.emit_hop();
        speeds.push(slot.session.velocity().x);
    }
    for (h, s) in speeds.iter().enumerate().skip(10) {
        assert!((s - 250.0).abs() < 1e-6, "hop {h}: {s}");
    }
    assert_eq!(slot.session.stats().dropped_events, 0);
}

fn is_silent(frame: &[u8]) -> bool {
    let (_, block) = decode_frame(frame).unwrap();
    block.channels.iter().flatten().all(|&s| s == 0.0)
}

#[test]
fn motion_onset_and_stop_are_audible_within_50_ms() {
    let lib = library(1);
    let mut slot = lib.open_session(&config(12)).unwrap();
    // resting finger for 0.5 s, moving at 200 mm/s for 1 s, resting again
    let x_at = |t: f64| {
        let moving = (t - 0.5).clamp(0.0, 1.0);
        200.0 * moving * DPI / 25.4
    };
    let mut onset = None;
    let mut stop = None;
    for h in 0..250 {
        let t = h as f64 * 0.01;
        slot.session.ingest_pointer(PointerPx {
            t,
            x: x_at(t),
            y: 0.0,
        });
        let silent = is_silent(&slot.session.emit_hop());
        if h < 50 {
            assert!(silent, "sound before motion at hop {h}");
        }
        if onset.is_none() && !silent {
            onset = Some(h);
        }
        if h > 150 && stop.is_none() && silent {
            stop = Some(h);
        }
    }
    // motion starts after the event at hop 50, stops after hop 150
    let onset = onset.expect("never sounded");
    let stop = stop.expect("never fell silent");
    assert!(
        (onset - 50) * 10 <= 50,
        "onset latency {} ms",
        (onset - 50) * 10
    );
    assert!(
        (stop - 150) * 10 <= 50,
        "stop latency {} ms",
        (stop - 150) * 10
    );
}
