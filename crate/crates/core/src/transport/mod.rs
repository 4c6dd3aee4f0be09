//! Four-role sessions: wire format, schedule and timing checks, role state
//! machines, and two runtimes (a discrete-event simulator and TCP).

pub mod agents;
mod config;
pub mod net;
pub mod session;
pub mod sim;
pub mod timing;
pub mod wire;

pub use config::{Endpoints, ProtocolConfig, Role, RoleMap, Seeds};
pub use session::{evaluate_session, HalfRound, HalfTranscript, RoundTranscript, SessionReport};
pub use timing::{check_timing, light_time_ns, schedule_round, SPEED_OF_LIGHT_KM_PER_S};

use thiserror::Error;

use crate::coding::CodingError;
use crate::fq::FqError;
use crate::stern::SternError;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("round {round} outside 1..={rounds}")]
    RoundOutOfRange { round: u32, rounds: u32 },
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Field(#[from] FqError),
    #[error(transparent)]
    Stern(#[from] SternError),
}
