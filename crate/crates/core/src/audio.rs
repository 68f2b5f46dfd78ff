//! PCM audio clips and RIFF/WAVE input/output.

use std::fs;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Sample rate every clip entering the pipeline must have.
pub const SAMPLE_RATE: u32 = 48_000;

const I16_FULL_SCALE: f32 = 32_768.0;
const I24_FULL_SCALE: f64 = 8_388_608.0;

/// Planar multichannel audio with samples normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    sample_rate: u32,
    channels: Vec<Vec<f32>>,
}

impl AudioClip {
    /// Builds a clip from planar channel data. One or two channels of equal length.
    pub fn new(sample_rate: u32, channels: Vec<Vec<f32>>) -> Result<Self> {
        if channels.is_empty() || channels.len() > 2 {
            return Err(Error::InvalidClip(format!(
                "expected 1 or 2 channels, got {}",
                channels.len()
            )));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidClip("channels differ in length".into()));
        }
        Ok(AudioClip {
            sample_rate,
            channels,
        })
    }

    pub fn stereo(sample_rate: u32, left: Vec<f32>, right: Vec<f32>) -> Result<Self> {
        Self::new(sample_rate, vec![left, right])
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, index: usize) -> &[f32] {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Largest absolute sample value over all channels.
    pub fn peak(&self) -> f32 {
        self.channels
            .iter()
            .flatten()
            .fold(0.0f32, |m, s| m.max(s.abs()))
    }

    /// Duplicates a mono clip into two channels; stereo clips are returned as is.
    pub fn into_stereo(mut self) -> Self {
        if self.channels.len() == 1 {
            let mono = self.channels[0].clone();
            self.channels.push(mono);
        }
        self
    }
}

/// Sample encodings accepted by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Pcm24,
    Float32,
}

/// Reads a 48 kHz PCM (16/24-bit integer or 32-bit float) WAV file.
///
/// Mono input is duplicated to stereo. No resampling is performed.
pub fn load_audio(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let wav_err = |e: hound::Error| match e {
        hound::Error::IoError(source) => Error::io(path, source),
        hound::Error::Unsupported => {
            Error::UnsupportedEncoding(format!("{}: unsupported wav variant", path.display()))
        }
        other => Error::Wav {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    };
    let mut reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::UnsupportedSampleRate(spec.sample_rate));
    }
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(Error::UnsupportedEncoding(format!(
            "{channels} channels (expected 1 or 2)"
        )));
    }

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / I16_FULL_SCALE))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Int, 24) => reader
            .samples::<i32>()
            .map(|s| s.map(|v| (v as f64 / I24_FULL_SCALE) as f32))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (format, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{bits}-bit {format:?} samples"
            )))
        }
    };

    let frames = interleaved.len() / channels;
    let mut planar = vec![Vec::with_capacity(frames); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (c, &s) in frame.iter().enumerate() {
            planar[c].push(s);
        }
    }
    Ok(AudioClip::new(SAMPLE_RATE, planar)?.into_stereo())
}

/// Quantizes a normalized sample to signed 24-bit, clamping to `[-1, 1]` first
/// and rounding half away from zero.
pub fn quantize_24(sample: f32) -> i32 {
    let clamped = (sample as f64).clamp(-1.0, 1.0);
    let q = (clamped * I24_FULL_SCALE).round();
    q.clamp(-I24_FULL_SCALE, I24_FULL_SCALE - 1.0) as i32
}

fn quantize_16(sample: f32) -> i16 {
    let clamped = sample.clamp(-1.0, 1.0);
    (clamped * I16_FULL_SCALE)
        .round()
        .clamp(-I16_FULL_SCALE, I16_FULL_SCALE - 1.0) as i16
}

/// Writes a clip as an interleaved RIFF/WAVE file.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let (bits, format) = match encoding {
        WavEncoding::Pcm16 => (16, SampleFormat::Int),
        WavEncoding::Pcm24 => (24, SampleFormat::Int),
        WavEncoding::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: clip.channel_count() as u16,
        sample_rate: clip.sample_rate(),
        bits_per_sample: bits,
        sample_format: format,
    };
    let wav_err = |e: hound::Error| match e {
        hound::Error::IoError(source) => Error::io(path, source),
        other => Error::Wav {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    };
    let mut writer = WavWriter::create(path, spec).map_err(wav_err)?;
    for i in 0..clip.len() {
        for ch in clip.channels() {
            let s = ch[i];
            match encoding {
                WavEncoding::Pcm16 => writer.write_sample(quantize_16(s)),
                WavEncoding::Pcm24 => writer.write_sample(quantize_24(s)),
                WavEncoding::Float32 => writer.write_sample(s),
            }
            .map_err(wav_err)?;
        }
    }
    writer.finalize().map_err(wav_err)
}

/// Lowercase hex SHA-256 of a file's bytes.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
