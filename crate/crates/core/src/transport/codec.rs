//! Little-endian wire layout:
//! `"TQ" | version u8 | kind u8 | seq u32 | t_send f64 | payload f64…`.

use thiserror::Error;

use super::{FeedbackPacket, LeaderPacket, Packet, PayloadKind};
use crate::Axes;

const MAGIC: [u8; 2] = *b"TQ";
pub const VERSION: u8 = 1;
pub const HEADER_SIZE: usize = 2 + 1 + 1 + 4 + 8;
pub const LEADER_WIRE_SIZE: usize = HEADER_SIZE + 12 * 8;
pub const FEEDBACK_WIRE_SIZE: usize = HEADER_SIZE + 3 * 8;

const KIND_RAW: u8 = 0;
const KIND_TARGET: u8 = 1;
const KIND_FEEDBACK: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeErrorKind {
    BadMagic,
    BadVersion(u8),
    BadKind(u8),
    Truncated { needed: usize },
    TrailingBytes { len: usize },
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("decode error at byte {offset}: {kind:?}")]
pub struct DecodeError {
    pub offset: usize,
    pub kind: DecodeErrorKind,
}

pub fn encode(packet: &Packet) -> Vec<u8> {
    let (kind, seq, t, fields): (u8, u32, f64, Vec<f64>) = match packet {
        Packet::Leader(p) => {
            let kind = match p.kind {
                PayloadKind::RawState => KIND_RAW,
                PayloadKind::Target => KIND_TARGET,
            };
            let mut f = Vec::with_capacity(12);
            for v in [&p.position, &p.velocity, &p.l1, &p.l2] {
                f.extend_from_slice(v.as_slice());
            }
            (kind, p.seq, p.t_send, f)
        }
        Packet::Feedback(p) => (KIND_FEEDBACK, p.seq, p.t_send, p.f_env.as_slice().to_vec()),
    };
    let mut out = Vec::with_capacity(HEADER_SIZE + fields.len() * 8);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(kind);
    out.extend_from_slice(&seq.to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for f in fields {
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let end = self.pos + N;
        let bytes = self.buf.get(self.pos..end).ok_or(DecodeError {
            offset: self.buf.len(),
            kind: DecodeErrorKind::Truncated { needed: end },
        })?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice length checked"))
    }

    fn f64(&mut self) -> Result<f64, DecodeError> {
        Ok(f64::from_le_bytes(self.take::<8>()?))
    }

    fn axes(&mut self) -> Result<Axes, DecodeError> {
        Ok(Axes::new(self.f64()?, self.f64()?, self.f64()?))
    }
}

pub fn decode(buf: &[u8]) -> Result<Packet, DecodeError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take::<2>()? != MAGIC {
        return Err(DecodeError { offset: 0, kind: DecodeErrorKind::BadMagic });
    }
    let [version] = r.take::<1>()?;
    if version != VERSION {
        return Err(DecodeError { offset: 2, kind: DecodeErrorKind::BadVersion(version) });
    }
    let [kind] = r.take::<1>()?;
    if kind > KIND_FEEDBACK {
        return Err(DecodeError { offset: 3, kind: DecodeErrorKind::BadKind(kind) });
    }
    let expected = if kind == KIND_FEEDBACK { FEEDBACK_WIRE_SIZE } else { LEADER_WIRE_SIZE };
    if buf.len() < expected {
        return Err(DecodeError {
            offset: buf.len(),
            kind: DecodeErrorKind::Truncated { needed: expected },
        });
    }
    let seq = u32::from_le_bytes(r.take::<4>()?);
    let t_send = r.f64()?;
    let packet = if kind == KIND_FEEDBACK {
        Packet::Feedback(FeedbackPacket { seq, t_send, f_env: r.axes()? })
    } else {
        Packet::Leader(LeaderPacket {
            seq,
            t_send,
            kind: if kind == KIND_RAW { PayloadKind::RawState } else { PayloadKind::Target },
            position: r.axes()?,
            velocity: r.axes()?,
            l1: r.axes()?,
            l2: r.axes()?,
        })
    };
    if r.pos != buf.len() {
        return Err(DecodeError {
            offset: r.pos,
            kind: DecodeErrorKind::TrailingBytes { len: buf.len() },
        });
    }
    Ok(packet)
}
