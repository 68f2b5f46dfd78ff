//! Interactive sonification service.
//!
//! Clients open a session over a websocket at `/session`, stream pointer
//! events as JSON text messages and receive one binary audio frame per 10 ms.

pub mod library;
pub mod protocol;
pub mod server;
pub mod session;

pub use library::{CorpusSummary, Library, ServiceError, SessionSlot};
pub use protocol::{decode_frame, encode_frame, ClientMessage, ServerMessage, FRAME_LEN};
pub use server::{router, serve};
pub use session::{PointerPx, Session, SessionConfig, SessionStats};
