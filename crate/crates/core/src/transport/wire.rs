//! Frame layout: `"RZKP"`, version `1`, message type, round (u32 BE),
//! payload length (u32 BE), payload. Field elements are fixed-width
//! big-endian; the phase-2 challenge is a single byte.

use std::io::{self, Read, Write};

use super::{Role, TransportError};
use crate::fq::{Field, FieldElement};
use crate::stern::{Challenge, Opening, Phase1Message, Phase1Response, Phase2Response};

pub const MAGIC: [u8; 4] = *b"RZKP";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;
/// Upper bound on accepted payloads; larger length fields are malformed.
pub const MAX_PAYLOAD: u32 = 1 << 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    Phase1Challenge = 1,
    Phase1Response = 2,
    Phase2Challenge = 3,
    Phase2Response = 4,
    Sync = 5,
    Report = 6,
}

impl TryFrom<u8> for MessageType {
    type Error = TransportError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Ok(match v {
            1 => MessageType::Phase1Challenge,
            2 => MessageType::Phase1Response,
            3 => MessageType::Phase2Challenge,
            4 => MessageType::Phase2Response,
            5 => MessageType::Sync,
            6 => MessageType::Report,
            other => return Err(TransportError::Malformed(format!("unknown message type {other}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MessageType,
    pub round: u32,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MessageType, round: u32, payload: Vec<u8>) -> Self {
        Self {
            msg_type,
            round,
            payload,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.round.to_be_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses the fixed header, returning type, round and payload length.
    pub fn decode_header(h: &[u8; HEADER_LEN]) -> Result<(MessageType, u32, u32), TransportError> {
        if h[..4] != MAGIC {
            return Err(TransportError::Malformed("bad magic".into()));
        }
        if h[4] != VERSION {
            return Err(TransportError::Malformed(format!("unsupported version {}", h[4])));
        }
        let msg_type = MessageType::try_from(h[5])?;
        let round = u32::from_be_bytes(h[6..10].try_into().unwrap());
        let len = u32::from_be_bytes(h[10..14].try_into().unwrap());
        if len > MAX_PAYLOAD {
            return Err(TransportError::Malformed(format!("payload length {len} too large")));
        }
        Ok((msg_type, round, len))
    }

    /// Decodes one frame from the front of `buf`; `Ok(None)` if incomplete.
    pub fn decode(buf: &[u8]) -> Result<Option<(Frame, usize)>, TransportError> {
        let Some(header) = buf.get(..HEADER_LEN) else {
            return Ok(None);
        };
        let (msg_type, round, len) = Self::decode_header(header.try_into().unwrap())?;
        let end = HEADER_LEN + len as usize;
        let Some(payload) = buf.get(HEADER_LEN..end) else {
            return Ok(None);
        };
        Ok(Some((Frame::new(msg_type, round, payload.to_vec()), end)))
    }

    /// Reads exactly one frame; `Ok(None)` on clean end of stream.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<Frame>, TransportError> {
        let mut header = [0u8; HEADER_LEN];
        match r.read_exact(&mut header) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        let (msg_type, round, len) = Self::decode_header(&header)?;
        let mut payload = vec![0u8; len as usize];
        r.read_exact(&mut payload)?;
        Ok(Some(Frame::new(msg_type, round, payload)))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.encode())?;
        w.flush()
    }
}

fn concat(elems: &[&FieldElement]) -> Vec<u8> {
    elems.iter().flat_map(|e| e.to_bytes()).collect()
}

/// Splits a payload into `count` field elements. On failure returns the
/// 0-based slot that could not be parsed.
pub fn split_elements(field: &Field, payload: &[u8], count: usize) -> Result<Vec<FieldElement>, usize> {
    let width = field.byte_width();
    let mut out = Vec::with_capacity(count);
    for slot in 0..count {
        let chunk = payload
            .get(slot * width..(slot + 1) * width)
            .ok_or(slot)?;
        out.push(FieldElement::from_bytes(field, chunk).map_err(|_| slot)?);
    }
    if payload.len() != count * width {
        return Err(count - 1);
    }
    Ok(out)
}

pub fn encode_phase1_challenge(m: &Phase1Message) -> Vec<u8> {
    concat(&[&m.b[0], &m.b[1], &m.b[2]])
}

pub fn decode_phase1_challenge(field: &Field, p: &[u8]) -> Result<Phase1Message, usize> {
    let v = split_elements(field, p, 3)?;
    Ok(Phase1Message {
        b: v.try_into().unwrap(),
    })
}

pub fn encode_phase1_response(m: &Phase1Response) -> Vec<u8> {
    concat(&[&m.y[0], &m.y[1], &m.y[2]])
}

pub fn decode_phase1_response(field: &Field, p: &[u8]) -> Result<Phase1Response, usize> {
    let v = split_elements(field, p, 3)?;
    Ok(Phase1Response {
        y: v.try_into().unwrap(),
    })
}

pub fn encode_phase2_challenge(c: Challenge) -> Vec<u8> {
    vec![u8::from(c)]
}

pub fn decode_phase2_challenge(p: &[u8]) -> Result<Challenge, TransportError> {
    match p {
        [c] => Challenge::try_from(*c).map_err(|e| TransportError::Malformed(e.to_string())),
        _ => Err(TransportError::Malformed(format!("challenge payload of {} bytes", p.len()))),
    }
}

/// `z_i, a_i, z_j, a_j` for the two opened indices `i < j`.
pub fn encode_phase2_response(m: &Phase2Response) -> Vec<u8> {
    let [o1, o2] = &m.openings;
    concat(&[&o1.z, &o1.a, &o2.z, &o2.a])
}

/// Decodes openings for challenge `c`. On failure returns the commitment
/// index whose opening could not be parsed.
pub fn decode_phase2_response(field: &Field, c: Challenge, p: &[u8]) -> Result<Phase2Response, usize> {
    let [i, j] = c.opened();
    let v = split_elements(field, p, 4).map_err(|slot| if slot < 2 { i } else { j })?;
    let [z1, a1, z2, a2]: [FieldElement; 4] = v.try_into().unwrap();
    Ok(Phase2Response {
        openings: [
            Opening { index: i, z: z1, a: a1 },
            Opening { index: j, z: z2, a: a2 },
        ],
    })
}

pub fn encode_sync(role: Role, t1_ns: i64) -> Vec<u8> {
    let mut out = vec![role as u8];
    out.extend_from_slice(&t1_ns.to_be_bytes());
    out
}

pub fn decode_sync(p: &[u8]) -> Result<(Role, i64), TransportError> {
    if p.len() != 9 {
        return Err(TransportError::Malformed(format!("sync payload of {} bytes", p.len())));
    }
    let role = Role::try_from(p[0])?;
    Ok((role, i64::from_be_bytes(p[1..9].try_into().unwrap())))
}
