//! Control messages and the binary audio frame.

use rubsynth::{Block, HOP, SAMPLE_RATE};
use serde::{Deserialize, Serialize};

/// First four bytes of every audio frame, as a little-endian u32.
pub const FRAME_MAGIC: u32 = 0x534F_4E47;
pub const FRAME_VERSION: u16 = 1;
pub const FRAME_HEADER_LEN: usize = 16;
pub const FRAME_PAYLOAD_LEN: usize = HOP * 2 * 4;
pub const FRAME_LEN: usize = FRAME_HEADER_LEN + FRAME_PAYLOAD_LEN;

/// Messages sent by the client as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Open {
        corpus: String,
        dpi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Pointer {
        t: f64,
        x: f64,
        y: f64,
    },
    Close,
}

/// Messages sent by the server as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Opened {
        session: String,
        sample_rate: u32,
        block: usize,
        format: String,
    },
    Error {
        code: String,
        message: String,
    },
}

impl ServerMessage {
    pub fn opened(session: impl Into<String>) -> Self {
        ServerMessage::Opened {
            session: session.into(),
            sample_rate: SAMPLE_RATE,
            block: HOP,
            format: "f32le".into(),
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server message serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame is {0} bytes, expected {FRAME_LEN}")]
    Length(usize),
    #[error("bad frame magic {0:#010x}")]
    Magic(u32),
    #[error("unsupported frame version {0}")]
    Version(u16),
}

/// Header fields: magic u32, version u16, flags u16, sequence u32 and a
/// reserved u32 (zero), all little-endian, followed by interleaved L/R f32le.
pub fn encode_frame(sequence: u32, block: &Block) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_LEN);
    out.extend_from_slice(&FRAME_MAGIC.to_le_bytes());
    out.extend_from_slice(&FRAME_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&sequence.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for (l, r) in block.left().iter().zip(block.right()) {
        out.extend_from_slice(&l.to_le_bytes());
        out.extend_from_slice(&r.to_le_bytes());
    }
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<(u32, Block), FrameError> {
    if bytes.len() != FRAME_LEN {
        return Err(FrameError::Length(bytes.len()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let magic = u32_at(0);
    if magic != FRAME_MAGIC {
        return Err(FrameError::Magic(magic));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FRAME_VERSION {
        return Err(FrameError::Version(version));
    }
    let sequence = u32_at(8);
    let mut block = Block::default();
    for (i, pair) in bytes[FRAME_HEADER_LEN..].chunks_exact(8).enumerate() {
        block.channels[0][i] = f32::from_le_bytes(pair[..4].try_into().unwrap());
        block.channels[1][i] = f32::from_le_bytes(pair[4..].try_into().unwrap());
    }
    Ok((sequence, block))
}
