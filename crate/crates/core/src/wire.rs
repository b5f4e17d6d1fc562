//! Wire format shared by the runtime protocols.
//!
//! Envelope: `<sender: u32, type: u8, body>`, little-endian throughout.
//! Primitive values use a tagged encoding (see [`Datum`]). The layout is
//! described in `docs/wire.md`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("message truncated at byte {0}")]
    Truncated(usize),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("unknown value tag {tag} at byte {at}")]
    UnknownTag { tag: u8, at: usize },
    #[error("string is not valid UTF-8")]
    Utf8,
    #[error("{0} too long for the wire format")]
    TooLong(&'static str),
    #[error("{0} trailing bytes after message body")]
    Trailing(usize),
}

/// Owned, serializable primitive value: what travels between robots and
/// what the virtual stigmergy stores.
#[derive(Debug, Clone, PartialEq)]
pub enum Datum {
    Nil,
    Int(i64),
    Float(f64),
    Str(String),
    /// Key/value pairs in table iteration order.
    Table(Vec<(Datum, Datum)>),
}

impl Datum {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Int(v) => Some(*v as f64),
            Self::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Self::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Looks up a string key in a table datum.
    pub fn field(&self, name: &str) -> Option<&Datum> {
        match self {
            Self::Table(pairs) => pairs
                .iter()
                .find(|(k, _)| matches!(k, Datum::Str(s) if s == name))
                .map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn encode(&self, out: &mut Vec<u8>) -> Result<(), WireError> {
        match self {
            Self::Nil => out.push(0),
            Self::Int(v) => {
                out.push(1);
                out.extend_from_slice(&v.to_le_bytes());
            }
            Self::Float(v) => {
                out.push(2);
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            Self::Str(s) => {
                out.push(3);
                put_str(out, s)?;
            }
            Self::Table(pairs) => {
                out.push(4);
                let n = u16::try_from(pairs.len()).map_err(|_| WireError::TooLong("table"))?;
                out.extend_from_slice(&n.to_le_bytes());
                for (k, v) in pairs {
                    k.encode(out)?;
                    v.encode(out)?;
                }
            }
        }
        Ok(())
    }

    pub fn encoded_len(&self) -> usize {
        match self {
            Self::Nil => 1,
            Self::Int(_) | Self::Float(_) => 9,
            Self::Str(s) => 3 + s.len(),
            Self::Table(pairs) => {
                3 + pairs
                    .iter()
                    .map(|(k, v)| k.encoded_len() + v.encoded_len())
                    .sum::<usize>()
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let at = r.at;
        Ok(match r.u8()? {
            0 => Self::Nil,
            1 => Self::Int(i64::from_le_bytes(r.array()?)),
            2 => Self::Float(f64::from_bits(u64::from_le_bytes(r.array()?))),
            3 => Self::Str(r.string()?),
            4 => {
                let n = r.u16()?;
                let mut pairs = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    let k = Self::decode(r)?;
                    let v = Self::decode(r)?;
                    pairs.push((k, v));
                }
                Self::Table(pairs)
            }
            tag => return Err(WireError::UnknownTag { tag, at }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum MessageType {
    Announce = 0,
    SwarmJoin = 1,
    SwarmLeave = 2,
    SwarmList = 3,
    VStigPut = 4,
    VStigGet = 5,
    Broadcast = 6,
}

impl MessageType {
    fn from_byte(b: u8) -> Option<Self> {
        use MessageType::*;
        Some(match b {
            0 => Announce,
            1 => SwarmJoin,
            2 => SwarmLeave,
            3 => SwarmList,
            4 => VStigPut,
            5 => VStigGet,
            6 => Broadcast,
            _ => return None,
        })
    }
}

/// Body of a stigmergy PUT or GET.
#[derive(Debug, Clone, PartialEq)]
pub struct VStigWire {
    pub vstig: u16,
    pub key: Datum,
    pub value: Datum,
    pub timestamp: u32,
    pub robot: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// Periodic presence beacon; the body is empty.
    Announce,
    SwarmJoin { swarm: u16 },
    SwarmLeave { swarm: u16 },
    SwarmList { swarms: Vec<u16> },
    VStigPut(VStigWire),
    VStigGet(VStigWire),
    Broadcast { key: String, value: Datum },
}

impl Message {
    pub fn kind(&self) -> MessageType {
        match self {
            Self::Announce => MessageType::Announce,
            Self::SwarmJoin { .. } => MessageType::SwarmJoin,
            Self::SwarmLeave { .. } => MessageType::SwarmLeave,
            Self::SwarmList { .. } => MessageType::SwarmList,
            Self::VStigPut(_) => MessageType::VStigPut,
            Self::VStigGet(_) => MessageType::VStigGet,
            Self::Broadcast { .. } => MessageType::Broadcast,
        }
    }
}

/// A message with its sender; `encode` produces the on-air bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub sender: u32,
    pub message: Message,
}

pub const ENVELOPE_HEADER: usize = 5;

impl Envelope {
    pub fn new(sender: u32, message: Message) -> Self {
        Self { sender, message }
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::with_capacity(32);
        out.extend_from_slice(&self.sender.to_le_bytes());
        out.push(self.message.kind() as u8);
        match &self.message {
            Message::Announce => {}
            Message::SwarmJoin { swarm } | Message::SwarmLeave { swarm } => {
                out.extend_from_slice(&swarm.to_le_bytes())
            }
            Message::SwarmList { swarms } => {
                let n = u8::try_from(swarms.len()).map_err(|_| WireError::TooLong("swarm list"))?;
                out.push(n);
                for s in swarms {
                    out.extend_from_slice(&s.to_le_bytes());
                }
            }
            Message::VStigPut(v) | Message::VStigGet(v) => {
                out.extend_from_slice(&v.vstig.to_le_bytes());
                v.key.encode(&mut out)?;
                v.value.encode(&mut out)?;
                out.extend_from_slice(&v.timestamp.to_le_bytes());
                out.extend_from_slice(&v.robot.to_le_bytes());
            }
            Message::Broadcast { key, value } => {
                put_str(&mut out, key)?;
                value.encode(&mut out)?;
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader { bytes, at: 0 };
        let sender = u32::from_le_bytes(r.array()?);
        let t = r.u8()?;
        let kind = MessageType::from_byte(t).ok_or(WireError::UnknownType(t))?;
        let message = match kind {
            MessageType::Announce => Message::Announce,
            MessageType::SwarmJoin => Message::SwarmJoin { swarm: r.u16()? },
            MessageType::SwarmLeave => Message::SwarmLeave { swarm: r.u16()? },
            MessageType::SwarmList => {
                let n = r.u8()?;
                let swarms = (0..n).map(|_| r.u16()).collect::<Result<_, _>>()?;
                Message::SwarmList { swarms }
            }
            MessageType::VStigPut | MessageType::VStigGet => {
                let body = VStigWire {
                    vstig: r.u16()?,
                    key: Datum::decode(&mut r)?,
                    value: Datum::decode(&mut r)?,
                    timestamp: u32::from_le_bytes(r.array()?),
                    robot: u32::from_le_bytes(r.array()?),
                };
                if kind == MessageType::VStigPut {
                    Message::VStigPut(body)
                } else {
                    Message::VStigGet(body)
                }
            }
            MessageType::Broadcast => Message::Broadcast {
                key: r.string()?,
                value: Datum::decode(&mut r)?,
            },
        };
        if r.at != bytes.len() {
            return Err(WireError::Trailing(bytes.len() - r.at));
        }
        Ok(Self { sender, message })
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<(), WireError> {
    let n = u16::try_from(s.len()).map_err(|_| WireError::TooLong("string"))?;
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], WireError> {
        if self.bytes.len() - self.at < n {
            return Err(WireError::Truncated(self.bytes.len()));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn string(&mut self) -> Result<String, WireError> {
        let n = self.u16()? as usize;
        let raw = self.take(n)?;
        std::str::from_utf8(raw)
            .map(str::to_string)
            .map_err(|_| WireError::Utf8)
    }
}
