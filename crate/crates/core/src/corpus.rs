//! Fragment segmentation, loudness annotation, ratio-based outlier rejection
//! and the on-disk corpus manifest.

use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::audio::{file_sha256, load_audio, AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::trace::VelocityTrace;
use crate::vec2::Vec2;

/// Samples per fragment: one 10 ms velocity period at 48 kHz.
pub const FRAGMENT_LEN: usize = 480;
/// Manifest `format_version` written and accepted by this crate.
pub const FORMAT_VERSION: u64 = 1;

/// Parameters of the outlier filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepParams {
    /// Lower percentile of the ratio population; ratios below it are dropped.
    pub p_lo: f64,
    /// Upper percentile; ratios above it are dropped.
    pub p_hi: f64,
    /// Fragments slower than this (mm/s) get no ratio and are dropped first.
    pub v_min: f64,
}

impl Default for PrepParams {
    fn default() -> Self {
        PrepParams {
            p_lo: 5.0,
            p_hi: 95.0,
            v_min: 1.0,
        }
    }
}

impl PrepParams {
    pub fn validate(&self) -> Result<()> {
        let ok_range = self.p_lo >= 0.0 && self.p_lo < self.p_hi && self.p_hi <= 100.0;
        if !ok_range {
            return Err(Error::InvalidParams(format!(
                "need 0 <= p_lo < p_hi <= 100, got p_lo={} p_hi={}",
                self.p_lo, self.p_hi
            )));
        }
        if !(self.v_min > 0.0 && self.v_min.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "v_min must be positive, got {}",
                self.v_min
            )));
        }
        Ok(())
    }
}

/// A 480-sample window annotated with velocity and loudness, before filtering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub velocity: Vec2,
    pub loudness: f64,
}

/// A retained fragment. `ratio` is loudness over squared speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fragment {
    pub index: usize,
    pub velocity: Vec2,
    pub loudness: f64,
    pub ratio: f64,
}

impl Fragment {
    /// Start of the fragment's window in the source clip.
    pub fn start_sample(&self) -> usize {
        self.index * FRAGMENT_LEN
    }
}

/// Root-mean-square over all channels of a window:
/// `sqrt(sum(x^2) / (len * channels))`.
pub fn rms_loudness<S: Copy + Into<f64>>(channels: &[&[S]]) -> f64 {
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for ch in channels {
        for &s in ch.iter() {
            let x: f64 = s.into();
            sum += x * x;
        }
        count += ch.len();
    }
    if count == 0 {
        return 0.0;
    }
    (sum / count as f64).sqrt()
}

/// Splits the clip into consecutive 480-sample windows, pairing window `j`
/// with trace sample `j`. The longer input is truncated.
pub fn segment(clip: &AudioClip, trace: &VelocityTrace) -> Result<Vec<Segment>> {
    if clip.sample_rate() != SAMPLE_RATE {
        return Err(Error::UnsupportedSampleRate(clip.sample_rate()));
    }
    let audio_frags = clip.len() / FRAGMENT_LEN;
    let count = audio_frags.min(trace.len());
    if count == 0 {
        return Err(Error::NoFragments);
    }
    if audio_frags != trace.len() || !clip.len().is_multiple_of(FRAGMENT_LEN) {
        log::warn!(
            "clip holds {} samples ({} full fragments), trace holds {} samples; using {} fragments",
            clip.len(),
            audio_frags,
            trace.len(),
            count
        );
    }
    Ok((0..count)
        .map(|j| {
            let range = j * FRAGMENT_LEN..(j + 1) * FRAGMENT_LEN;
            let windows: Vec<&[f32]> = clip.channels().iter().map(|c| &c[range.clone()]).collect();
            Segment {
                index: j,
                velocity: trace.samples()[j],
                loudness: rms_loudness(&windows),
            }
        })
        .collect())
}

/// Linear-interpolation percentile of an ascending slice, `rank = p/100 * (n-1)`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty population");
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Result of [`filter_outliers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub fragments: Vec<Fragment>,
    pub mean_ratio: f64,
    pub dropped_slow: usize,
    pub dropped_outliers: usize,
    /// Ratio values at `p_lo` and `p_hi`.
    pub bounds: (f64, f64),
}

/// Drops slow fragments, then fragments whose ratio lies strictly outside
/// the `[p_lo, p_hi]` percentile values, and averages the surviving ratios.
pub fn filter_outliers(
    segments: &[Segment],
    params: &PrepParams,
    min_retained: usize,
) -> Result<Filtered> {
    params.validate()?;
    let moving: Vec<Fragment> = segments
        .iter()
        .filter(|s| s.velocity.norm() >= params.v_min)
        .map(|s| Fragment {
            index: s.index,
            velocity: s.velocity,
            loudness: s.loudness,
            ratio: s.loudness / s.velocity.norm_sq(),
        })
        .collect();
    if moving.is_empty() {
        return Err(Error::NoMovingFragments(params.v_min));
    }
    let dropped_slow = segments.len() - moving.len();

    let mut sorted: Vec<f64> = moving.iter().map(|f| f.ratio).collect();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile(&sorted, params.p_lo);
    let hi = percentile(&sorted, params.p_hi);

    let fragments: Vec<Fragment> = moving
        .iter()
        .filter(|f| f.ratio >= lo && f.ratio <= hi)
        .copied()
        .collect();
    let dropped_outliers = moving.len() - fragments.len();
    if fragments.len() < min_retained.max(1) {
        return Err(Error::TooFewFragments {
            retained: fragments.len(),
            required: min_retained.max(1),
        });
    }
    let mean_ratio = fragments.iter().map(|f| f.ratio).sum::<f64>() / fragments.len() as f64;
    if !(mean_ratio > 0.0) {
        return Err(Error::SilentCorpus);
    }
    Ok(Filtered {
        fragments,
        mean_ratio,
        dropped_slow,
        dropped_outliers,
        bounds: (lo, hi),
    })
}

/// Fragment counts reported after a build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildReport {
    pub total: usize,
    pub dropped_slow: usize,
    pub dropped_outliers: usize,
    pub retained: usize,
}

/// The filtered fragment set, its mean ratio and the source clip.
///
/// Immutable once built; share it between sessions behind an `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    fragments: Vec<Fragment>,
    mean_ratio: f64,
    params: PrepParams,
    audio_path: PathBuf,
    audio_sha256: String,
    audio: Arc<AudioClip>,
}

impl Corpus {
    /// Builds a corpus from an in-memory clip. `audio_path` and `audio_sha256`
    /// identify the file the clip was read from.
    pub fn from_clip(
        clip: AudioClip,
        audio_path: impl Into<PathBuf>,
        audio_sha256: String,
        trace: &VelocityTrace,
        params: PrepParams,
        min_retained: usize,
    ) -> Result<(Corpus, BuildReport)> {
        let clip = clip.into_stereo();
        let segments = segment(&clip, trace)?;
        let filtered = filter_outliers(&segments, &params, min_retained)?;
        let report = BuildReport {
            total: segments.len(),
            dropped_slow: filtered.dropped_slow,
            dropped_outliers: filtered.dropped_outliers,
            retained: filtered.fragments.len(),
        };
        let corpus = Corpus {
            fragments: filtered.fragments,
            mean_ratio: filtered.mean_ratio,
            params,
            audio_path: audio_path.into(),
            audio_sha256,
            audio: Arc::new(clip),
        };
        Ok((corpus, report))
    }

    /// Reads the WAV at `audio_path` and builds a corpus from it.
    pub fn build(
        audio_path: impl AsRef<Path>,
        trace: &VelocityTrace,
        params: PrepParams,
        min_retained: usize,
    ) -> Result<(Corpus, BuildReport)> {
        let audio_path = audio_path.as_ref();
        params.validate()?;
        let clip = load_audio(audio_path)?;
        let digest = file_sha256(audio_path)?;
        Self::from_clip(clip, audio_path, digest, trace, params, min_retained)
    }

    pub fn fragments(&self) -> &[Fragment] {
        &self.fragments
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    pub fn mean_ratio(&self) -> f64 {
        self.mean_ratio
    }

    pub fn params(&self) -> &PrepParams {
        &self.params
    }

    pub fn audio_path(&self) -> &Path {
        &self.audio_path
    }

    pub fn audio_sha256(&self) -> &str {
        &self.audio_sha256
    }

    pub fn audio(&self) -> &AudioClip {
        &self.audio
    }

    /// Number of full 480-sample windows in the source clip, retained or not.
    pub fn source_fragment_count(&self) -> usize {
        self.audio.len() / FRAGMENT_LEN
    }

    /// Writes the manifest to `path`. The audio path is stored relative to
    /// the manifest's directory when possible.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let manifest_dir = absolute(path.parent().unwrap_or(Path::new("")))?;
        let audio_abs = absolute(&self.audio_path)?;
        let rel = relative_to(&audio_abs, &manifest_dir);
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            audio_path: rel.to_string_lossy().replace('\\', "/"),
            audio_sha256: self.audio_sha256.clone(),
            sample_rate: SAMPLE_RATE,
            fragment_length: FRAGMENT_LEN,
            mean_ratio: self.mean_ratio,
            params: self.params,
            fragments: self
                .fragments
                .iter()
                .map(|f| FragmentRecord {
                    index: f.index,
                    vx: f.velocity.x,
                    vy: f.velocity.y,
                    loudness: f.loudness,
                    ratio: f.ratio,
                })
                .collect(),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    /// Reads a manifest written by [`Corpus::save`], re-reading and verifying the WAV.
    pub fn load(path: impl AsRef<Path>) -> Result<Corpus> {
        let path = path.as_ref();
        let format_err = |message: String| Error::CorpusFormat {
            path: path.to_path_buf(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| format_err(e.to_string()))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(FORMAT_VERSION) => {}
            Some(other) => return Err(Error::FormatVersion(other)),
            None => return Err(format_err("missing or invalid format_version".into())),
        }
        let manifest: Manifest =
            serde_json::from_value(value).map_err(|e| format_err(e.to_string()))?;
        if manifest.sample_rate != SAMPLE_RATE {
            return Err(Error::UnsupportedSampleRate(manifest.sample_rate));
        }
        if manifest.fragment_length != FRAGMENT_LEN {
            return Err(format_err(format!(
                "fragment_length {} (expected {FRAGMENT_LEN})",
                manifest.fragment_length
            )));
        }
        manifest.params.validate()?;

        let audio_path = path
            .parent()
            .unwrap_or(Path::new(""))
            .join(&manifest.audio_path);
        let actual = file_sha256(&audio_path)?;
        if actual != manifest.audio_sha256 {
            return Err(Error::DigestMismatch {
                path: audio_path,
                expected: manifest.audio_sha256,
                actual,
            });
        }
        let audio = load_audio(&audio_path)?;

        let frags = audio.len() / FRAGMENT_LEN;
        let mut prev: Option<usize> = None;
        let mut fragments = Vec::with_capacity(manifest.fragments.len());
        for r in &manifest.fragments {
            if prev.is_some_and(|p| r.index <= p) {
                return Err(format_err(format!(
                    "fragment indices not strictly increasing at {}",
                    r.index
                )));
            }
            if r.index >= frags {
                return Err(format_err(format!(
                    "fragment {} lies beyond the audio file ({} samples)",
                    r.index,
                    audio.len()
                )));
            }
            prev = Some(r.index);
            fragments.push(Fragment {
                index: r.index,
                velocity: Vec2::new(r.vx, r.vy),
                loudness: r.loudness,
                ratio: r.ratio,
            });
        }
        if fragments.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if !(manifest.mean_ratio > 0.0) {
            return Err(Error::SilentCorpus);
        }
        Ok(Corpus {
            fragments,
            mean_ratio: manifest.mean_ratio,
            params: manifest.params,
            audio_path,
            audio_sha256: manifest.audio_sha256,
            audio: Arc::new(audio),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FragmentRecord {
    index: usize,
    vx: f64,
    vy: f64,
    loudness: f64,
    ratio: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u64,
    audio_path: String,
    audio_sha256: String,
    sample_rate: u32,
    fragment_length: usize,
    mean_ratio: f64,
    params: PrepParams,
    fragments: Vec<FragmentRecord>,
}

fn absolute(path: &Path) -> Result<PathBuf> {
    let path = if path.as_os_str().is_empty() {
        Path::new(".")
    } else {
        path
    };
    std::path::absolute(path).map_err(|e| Error::io(path, e))
}

fn relative_to(target: &Path, base: &Path) -> PathBuf {
    fn normal(p: &Path) -> Vec<Component<'_>> {
        p.components().filter(|c| *c != Component::CurDir).collect()
    }
    let t = normal(target);
    let b = normal(base);
    if t.first() != b.first() {
        return target.to_path_buf();
    }
    let common = t.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let mut rel = PathBuf::new();
    for _ in common..b.len() {
        rel.push("..");
    }
    for c in &t[common..] {
        rel.push(c.as_os_str());
    }
    rel
}
