//! Fixtures shared by the criterion benchmarks.

use std::sync::Arc;

use rubsynth::synthetic::SyntheticRecording;
use rubsynth::{Corpus, Engine, PrepParams};

/// Engine over a seeded synthetic recording of `fragments` fragments.
pub fn synthetic_engine(fragments: usize) -> Arc<Engine> {
    let (clip, trace) = SyntheticRecording {
        fragments,
        ..Default::default()
    }
    .generate();
    let (corpus, _) = Corpus::from_clip(
        clip,
        "synthetic.wav",
        String::new(),
        &trace,
        PrepParams::default(),
        25,
    )
    .expect("synthetic corpus builds");
    Engine::new(corpus).expect("synthetic corpus indexes")
}
