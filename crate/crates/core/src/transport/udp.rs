use std::io;
use std::net::{Ipv4Addr, SocketAddr, UdpSocket};
use std::time::Duration;

use thiserror::Error;

use super::codec::{decode, encode, DecodeError};
use super::{Packet, Timestamped};

#[derive(Debug, Error)]
pub enum WireError {
    #[error("socket: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("packet {seq} lost")]
    Lost { seq: u32 },
}

/// Carries a packet from the leader side to the follower side.
pub trait Wire {
    fn transmit(&mut self, packet: Packet) -> Result<Packet, WireError>;
}

/// Hands the value over unchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct InProcess;

impl Wire for InProcess {
    fn transmit(&mut self, packet: Packet) -> Result<Packet, WireError> {
        Ok(packet)
    }
}

/// Two loopback sockets; every packet is encoded, sent as one datagram and
/// decoded on the receiving socket.
#[derive(Debug)]
pub struct UdpLoopback {
    tx: UdpSocket,
    rx: UdpSocket,
    buf: [u8; 512],
}

impl UdpLoopback {
    /// `port` 0 picks an ephemeral port for the receiving side.
    pub fn bind(port: u16) -> io::Result<Self> {
        let rx = UdpSocket::bind(SocketAddr::from((Ipv4Addr::LOCALHOST, port)))?;
        rx.set_read_timeout(Some(Duration::from_secs(1)))?;
        let tx = UdpSocket::bind(SocketAddr::from((Ipv4Addr::LOCALHOST, 0)))?;
        tx.connect(rx.local_addr()?)?;
        Ok(Self { tx, rx, buf: [0; 512] })
    }

    pub fn receiver_addr(&self) -> io::Result<SocketAddr> {
        self.rx.local_addr()
    }
}

fn seq_of(p: &Packet) -> u32 {
    match p {
        Packet::Leader(l) => l.seq(),
        Packet::Feedback(f) => f.seq(),
    }
}

impl Wire for UdpLoopback {
    fn transmit(&mut self, packet: Packet) -> Result<Packet, WireError> {
        let seq = seq_of(&packet);
        self.tx.send(&encode(&packet))?;
        loop {
            let n = match self.rx.recv(&mut self.buf) {
                Ok(n) => n,
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    return Err(WireError::Lost { seq });
                }
                Err(e) => return Err(e.into()),
            };
            let got = decode(&self.buf[..n])?;
            // skip stale datagrams from an earlier timeout
            if seq_of(&got) == seq {
                return Ok(got);
            }
        }
    }
}
