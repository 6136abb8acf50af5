use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::graph::NodeId;

/// Broadcast payload. Ordered bytewise; the order is used as the delivery tie-break.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Info(Vec<u8>);

impl Info {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        Info(bytes.into())
    }

    pub fn from_hex(s: &str) -> Result<Self, WireError> {
        hex::decode(s).map(Info).map_err(|e| WireError(format!("bad hex {s:?}: {e}")))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn bits(&self) -> u64 {
        self.0.len() as u64 * 8
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl fmt::Debug for Info {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Info({})", self.to_hex())
    }
}

impl fmt::Display for Info {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Info {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Info {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Info::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("wire format: {0}")]
pub struct WireError(pub String);

/// What travels on a channel.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Message {
    /// A bare information; honoured only when it comes from the source.
    SourceInfo(Info),
    /// Relay tuple `(m, S)` where `S` lists already visited nodes.
    Relay { info: Info, visited: BTreeSet<NodeId> },
}

impl Message {
    pub fn relay(info: Info, visited: impl IntoIterator<Item = NodeId>) -> Self {
        Message::Relay { info, visited: visited.into_iter().collect() }
    }

    pub fn info(&self) -> &Info {
        match self {
            Message::SourceInfo(info) | Message::Relay { info, .. } => info,
        }
    }

    /// Semantic size: info bits plus `id_bits` per visited identifier.
    pub fn size_bits(&self, id_bits: u64) -> u64 {
        match self {
            Message::SourceInfo(info) => info.bits(),
            Message::Relay { info, visited } => info.bits() + id_bits * visited.len() as u64,
        }
    }

    /// Applies a node relabelling to the visited set.
    pub fn relabel(&self, map: &[NodeId]) -> Message {
        match self {
            Message::SourceInfo(info) => Message::SourceInfo(info.clone()),
            Message::Relay { info, visited } => {
                Message::Relay { info: info.clone(), visited: visited.iter().map(|&v| map[v as usize]).collect() }
            }
        }
    }
}

/// Line records `SRC <info-hex>` and `REL <info-hex> [id,id,...]`, with the
/// visited set sorted.
impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::SourceInfo(info) => write!(f, "SRC {info}"),
            Message::Relay { info, visited } => {
                write!(f, "REL {info} [")?;
                for (i, v) in visited.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl FromStr for Message {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(3, ' ');
        let kind = parts.next().unwrap_or_default();
        let info = Info::from_hex(parts.next().ok_or_else(|| WireError(format!("missing info in {s:?}")))?)?;
        match (kind, parts.next()) {
            ("SRC", None) => Ok(Message::SourceInfo(info)),
            ("REL", Some(set)) => {
                let inner = set
                    .strip_prefix('[')
                    .and_then(|x| x.strip_suffix(']'))
                    .ok_or_else(|| WireError(format!("malformed visited set {set:?}")))?;
                let visited = if inner.is_empty() {
                    BTreeSet::new()
                } else {
                    inner
                        .split(',')
                        .map(|x| x.parse::<NodeId>().map_err(|e| WireError(format!("bad id {x:?}: {e}"))))
                        .collect::<Result<_, _>>()?
                };
                Ok(Message::Relay { info, visited })
            }
            _ => Err(WireError(format!("unknown record {s:?}"))),
        }
    }
}

impl Serialize for Message {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Message {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
