//! Velocity-driven granular synthesis of material contact sound.
//!
//! A recorded rubbing sound and the synchronized finger-velocity trace are cut
//! into 10 ms fragments annotated with velocity and RMS loudness
//! ([`corpus`]). Fragments are indexed in a k-d tree over velocity and
//! normalized loudness ([`index`]). At run time each 10 ms velocity sample
//! selects one of the k nearest fragments, extends it into a grain and blends
//! it with the previous one ([`synth`]). [`velocity`] turns raw pointer
//! positions into the 100 Hz velocity stream.

// `!(x > y)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod corpus;
pub mod error;
pub mod index;
pub mod synth;
pub mod synthetic;
pub mod timing;
pub mod trace;
pub mod vec2;
pub mod velocity;

pub use audio::{load_audio, write_wav, AudioClip, WavEncoding, SAMPLE_RATE};
pub use corpus::{
    filter_outliers, percentile, rms_loudness, segment, BuildReport, Corpus, Fragment, PrepParams,
    Segment, FRAGMENT_LEN,
};
pub use error::{Error, Result};
pub use index::{distance, FeaturePoint, GrainIndex, Neighbor};
pub use synth::{
    build_grain, render_offline, Block, Crossfade, Engine, Grain, HopAction, SynthParams,
    SynthState, HOP,
};
pub use trace::{load_trace, VelocityTrace, TRACE_RATE};
pub use vec2::Vec2;
pub use velocity::{
    differentiate, resample_positions, smooth_positions, velocity_from_positions, PointerEvent,
    VelocityTracker,
};
