//! Leader→follower channel: packets, constant-delay line, binary codec and a
//! datagram link.

mod codec;
mod delay;
mod udp;

pub use codec::{decode, encode, DecodeError, DecodeErrorKind, FEEDBACK_WIRE_SIZE, HEADER_SIZE, LEADER_WIRE_SIZE};
pub use delay::{DelayLine, EnqueueError, Timestamped};
pub use udp::{InProcess, UdpLoopback, Wire, WireError};

use serde::{Deserialize, Serialize};

use crate::Axes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    /// Measured leader position and velocity (TIC).
    RawState,
    /// Estimated target position and velocity (IAC).
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderPacket {
    pub seq: u32,
    /// s, engine time
    pub t_send: f64,
    pub kind: PayloadKind,
    pub position: Axes,
    pub velocity: Axes,
    pub l1: Axes,
    pub l2: Axes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackPacket {
    pub seq: u32,
    pub t_send: f64,
    pub f_env: Axes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Packet {
    Leader(LeaderPacket),
    Feedback(FeedbackPacket),
}

impl Timestamped for LeaderPacket {
    fn seq(&self) -> u32 {
        self.seq
    }
    fn t_send(&self) -> f64 {
        self.t_send
    }
}

impl Timestamped for FeedbackPacket {
    fn seq(&self) -> u32 {
        self.seq
    }
    fn t_send(&self) -> f64 {
        self.t_send
    }
}
