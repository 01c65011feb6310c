//! Live playback of dynamic songs: a clock-free session state machine, its
//! wire protocol, and an HTTP/websocket server around it.

pub mod config;
pub mod library;
pub mod protocol;
pub mod replay;
pub mod server;
pub mod session;

pub use config::ServeConfig;
pub use library::Library;
pub use protocol::{ClientMessage, Reply, ServerMessage, StreamEvent, TransportState};
pub use replay::log_to_midi;
pub use session::{Session, SessionError};
