//! Live steering of a running cavity simulation over a websocket.
//!
//! A browser (or any websocket client) connects, receives
//! `{"type":"hello","proto":1,"session":..}` and then drives its own
//! simulation with JSON commands such as
//!
//! ```json
//! {"type":"configure","preset":"fig3-write-erase"}
//! {"type":"start"}
//! {"type":"add_beam","id":1,"center":12.0,"amplitude":1.0,"phase":0.0,"width":3.0,"duration":20.0}
//! ```
//!
//! The server answers with `ack`, `error`, `status`, `snapshot` and a
//! stream of decimated `frame` messages (at most 30 per second and 512
//! samples each). The same port serves static files over plain HTTP.

pub mod decimate;
mod error;
pub mod http;
pub mod protocol;
pub mod server;
pub mod session;

pub use error::{Result, SteerError};
pub use protocol::{ClientMessage, FrameMessage, ServerMessage, SessionCommand, SessionState, PROTOCOL_VERSION};
pub use server::{Server, ServerConfig, ServerHandle};
pub use session::{Session, SessionOptions, TickReport};
